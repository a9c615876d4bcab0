"""Unit tests for the homogeneous primal-dual SDP solver."""

import numpy as np
import pytest

from matrix_certifier.config import SdpOptions
from matrix_certifier.errors import MalformedInstance
from matrix_certifier.sdp import SdpInstance, SdpStatus, solve_feasibility, verify_dual_ray


def _trace_instance(value: float) -> SdpInstance:
    """{X >= 0 : tr X = value} on 2x2 matrices, plus X_01 = 0."""
    return SdpInstance.from_constraints(
        [2],
        [
            ([np.eye(2)], value),
            ([np.array([[0.0, 0.5], [0.5, 0.0]])], 0.0),
        ],
    )


class TestSolveFeasibility:
    @pytest.mark.unit
    def test_feasible_instance(self):
        sol = solve_feasibility(_trace_instance(2.0))
        assert sol.status is SdpStatus.FEASIBLE
        x = sol.primal[0]
        assert np.trace(x) == pytest.approx(2.0, abs=1e-6)
        assert np.linalg.eigvalsh(x)[0] >= -1e-8

    @pytest.mark.unit
    def test_infeasible_instance_has_verified_ray(self):
        inst = _trace_instance(-1.0)
        sol = solve_feasibility(inst, SdpOptions(feas_tol=1e-8))
        assert sol.status is SdpStatus.INFEASIBLE
        assert sol.dual_ray is not None
        check = verify_dual_ray(inst, sol.dual_ray, 1e-8)
        assert check.ok
        assert float(inst.rhs @ sol.dual_ray) < 0

    @pytest.mark.unit
    def test_entry_constraints(self):
        # X_00 = 1, X_11 = 1, X_01 = 2 is infeasible (2x2 minor negative)
        inst = SdpInstance.from_constraints(
            [2],
            [
                ([np.diag([1.0, 0.0])], 1.0),
                ([np.diag([0.0, 1.0])], 1.0),
                ([np.array([[0.0, 0.5], [0.5, 0.0]])], 2.0),
            ],
        )
        assert solve_feasibility(inst).status is SdpStatus.INFEASIBLE


class TestInstanceValidation:
    @pytest.mark.unit
    def test_asymmetric_coefficients_rejected(self):
        with pytest.raises(MalformedInstance):
            SdpInstance.from_constraints([2], [([np.array([[0.0, 1.0], [0.0, 0.0]])], 1.0)])

    @pytest.mark.unit
    def test_wrong_block_count_rejected(self):
        with pytest.raises(MalformedInstance):
            SdpInstance.from_constraints([1, 1], [([np.eye(1)], 1.0)])

    @pytest.mark.unit
    def test_json_dump_round_trip(self):
        inst = _trace_instance(2.0)
        again = SdpInstance.from_json(inst.to_json())
        assert again.block_dims == inst.block_dims
        np.testing.assert_allclose(again.coefficients[0], inst.coefficients[0])
        np.testing.assert_allclose(again.rhs, inst.rhs)
