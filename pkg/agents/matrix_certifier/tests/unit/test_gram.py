"""Unit tests for the Gram reduction, certificates and rationalization."""

from fractions import Fraction

import pytest

from matrix_certifier.config import SdpOptions
from matrix_certifier.errors import DegreeTooSmall, DimensionMismatch, InputError
from matrix_certifier.gram import (
    BlockKind,
    BlockSpec,
    CertificateBlock,
    MembershipCertificate,
    ModulePresentation,
    WeightedFactor,
    build_membership_sdp,
    certificate_from_solution,
    plan_blocks,
    rationalize,
    verify_certificate,
)
from matrix_certifier.polycore import MatrixPoly, ScalarPoly
from matrix_certifier.sdp import SdpStatus, solve_feasibility

from ..conftest import const, var


def _identity_spec(n: int, t: int, d: int) -> BlockSpec:
    return plan_blocks(ModulePresentation(n, t), d)[0]


class TestPlanBlocks:
    @pytest.mark.unit
    def test_block_kinds(self):
        x = var(1, 0)
        scalar = MatrixPoly.scalar_identity(1 - x * x, 2)
        diagonal = MatrixPoly.diagonal([x, 1 - x])
        full = MatrixPoly([[x, const(1, 1)], [const(1, 1), x]], 1)
        specs = plan_blocks(ModulePresentation(1, 2, (scalar, diagonal, full)), 2)
        kinds = [(s.generator_index, s.kind) for s in specs]
        assert kinds == [
            (0, BlockKind.SCALAR),
            (1, BlockKind.SCALAR),
            (2, BlockKind.DIAGONAL),
            (2, BlockKind.DIAGONAL),
            (3, BlockKind.FULL),
        ]
        # identity: t * |{1, X, X^2}|; full: t^2 * |{1, X}|
        assert specs[0].size == 6
        assert specs[-1].size == 8

    @pytest.mark.unit
    def test_presentation_rejects_wrong_shape(self):
        with pytest.raises(DimensionMismatch):
            ModulePresentation(1, 2, (MatrixPoly.identity(1, 3),))


class TestBuildMembershipSdp:
    @pytest.mark.unit
    def test_degree_too_small(self):
        x = var(1, 0)
        f = MatrixPoly.from_scalar(x**4 + 1)
        with pytest.raises(DegreeTooSmall):
            build_membership_sdp(f, ModulePresentation(1, 1), 1)

    @pytest.mark.unit
    def test_non_symmetric_target_rejected(self):
        x = var(1, 0)
        f = MatrixPoly([[x, x], [const(1, 0), x]], 1)
        with pytest.raises(InputError):
            build_membership_sdp(f, ModulePresentation(1, 2), 1)

    @pytest.mark.unit
    def test_sum_of_squares_is_feasible(self):
        x = var(1, 0)
        f = MatrixPoly.from_scalar(x * x - 2 * x + 3)
        problem = build_membership_sdp(f, ModulePresentation(1, 1), 1)
        sol = solve_feasibility(problem.instance)
        assert sol.status is SdpStatus.FEASIBLE
        cert = certificate_from_solution(sol, problem, SdpOptions())
        assert cert.residual is not None and cert.residual.passed

    @pytest.mark.unit
    def test_negative_constant_is_infeasible(self):
        f = MatrixPoly.from_scalar(const(1, -1))
        problem = build_membership_sdp(f, ModulePresentation(1, 1), 1)
        assert solve_feasibility(problem.instance).status is SdpStatus.INFEASIBLE


class TestVerifyAndRationalize:
    @pytest.mark.unit
    def test_hand_certificate_exact(self):
        # X^2 + 2X + 2 = (X + 1)^2 + 1 with basis (1, X)
        x = var(1, 0)
        f = MatrixPoly.from_scalar(x * x + 2 * x + 2)
        spec = _identity_spec(1, 1, 1)
        gram = [[Fraction(2), Fraction(1)], [Fraction(1), Fraction(1)]]
        cert = MembershipCertificate(f, ModulePresentation(1, 1), 1, (CertificateBlock(spec, gram),), exact=True)
        report = verify_certificate(cert, "exact")
        assert report.passed
        assert report.max_deviation == 0.0

    @pytest.mark.unit
    def test_indefinite_gram_fails(self):
        x = var(1, 0)
        f = MatrixPoly.from_scalar(2 * x)
        spec = _identity_spec(1, 1, 1)
        gram = [[Fraction(0), Fraction(1)], [Fraction(1), Fraction(0)]]
        cert = MembershipCertificate(f, ModulePresentation(1, 1), 1, (CertificateBlock(spec, gram),), exact=True)
        report = verify_certificate(cert, "exact")
        assert not report.passed
        assert report.message == "a Gram block is not PSD"

    @pytest.mark.unit
    def test_float_data_is_not_exact(self):
        spec = _identity_spec(1, 1, 0)
        f = MatrixPoly.from_scalar(const(1, 1))
        cert = MembershipCertificate(f, ModulePresentation(1, 1), 0, (CertificateBlock(spec, [[1.0]]),))
        assert not verify_certificate(cert, "exact").passed
        assert verify_certificate(cert, "numeric").passed

    @pytest.mark.unit
    def test_factor_only_block(self, symbolic_2x2):
        # C^T f C with C = E_00 picks the (0, 0) entry
        f = symbolic_2x2
        pres = ModulePresentation(3, 2, (f,))
        spec = plan_blocks(pres, 1)[1]
        unit = MatrixPoly.unit(3, 2, 0, 0)
        target = MatrixPoly.diagonal([var(3, 0), ScalarPoly.zero(3)])
        block = CertificateBlock(replace_basis(spec), [], (WeightedFactor(Fraction(1), unit),))
        cert = MembershipCertificate(target, pres, 1, (block,), exact=True)
        assert verify_certificate(cert, "exact").passed
        assert cert.reconstruct() == target

    @pytest.mark.unit
    def test_rationalize_round_trip(self, exact_config):
        x = var(1, 0)
        f = MatrixPoly.from_scalar(x * x - 2 * x + 3)
        problem = build_membership_sdp(f, ModulePresentation(1, 1), 1)
        sol = solve_feasibility(problem.instance)
        cert = certificate_from_solution(sol, problem)
        exact = rationalize(cert, exact_config.max_denominator)
        assert exact.exact
        assert verify_certificate(exact, "exact").passed
        assert exact.reconstruct() == f.to_fraction()

    @pytest.mark.unit
    def test_rationalize_snaps_zero_face(self, exact_config):
        # 1 - X^2 - Y^2 = 0 + (1 - X^2 - Y^2) * I: the identity block sits on its zero face
        x, y = var(2, 0), var(2, 1)
        pres = ModulePresentation.scalar(2, 2, [1 - x * x - y * y])
        target = MatrixPoly.scalar_identity(1 - x * x - y * y, 2)
        ident, gen = plan_blocks(pres, 1)[:2]
        noise = [[1e-11 * ((i + j) % 3 == 0) for j in range(ident.size)] for i in range(ident.size)]
        near_identity = [[1.0 + 2e-10, 3e-11], [3e-11, 1.0 - 1e-10]]
        cert = MembershipCertificate(
            target, pres, 1, (CertificateBlock(ident, noise), CertificateBlock(gen, near_identity))
        )
        exact = rationalize(cert, exact_config.max_denominator)
        assert exact.exact
        assert all(v == 0 for row in exact.blocks[0].gram for v in row)
        assert exact.blocks[1].gram == [[Fraction(1), Fraction(0)], [Fraction(0), Fraction(1)]]
        assert verify_certificate(exact, "exact").passed


def replace_basis(spec: BlockSpec) -> BlockSpec:
    return BlockSpec(spec.generator_index, spec.kind, spec.component, (), spec.weight, spec.generator)
