import math
import re

import pytest

from sparse_regret.bounds import (
    BoundPreconditionError,
    Setting,
    bandit_general_bound,
    bound_table,
    full_info_gains_bound,
    theoretical_bound,
)

# mpmath, 30 significant digits
GAINS_S4_T1E4 = 274.530099287034106
LOSSES_50_5_20000 = 129.004356990019641
BANDIT_64_4_40000 = 2196.24079429627285
ADAPTIVE_LOSSES_50_8_20000 = 453.491089452631718
ADAPTIVE_GAINS_8_20000 = 1427.76006040631225
BANDIT_LOWER_2_10000 = 4.41941738241592203


def test_reference_values():
    assert theoretical_bound(Setting.FULL_INFO_GAINS, 4, 100, 10000) == pytest.approx(GAINS_S4_T1E4, rel=1e-14)
    assert theoretical_bound("full-info-losses", 5, 50, 20000) == pytest.approx(LOSSES_50_5_20000, rel=1e-14)
    assert theoretical_bound(Setting.BANDIT_LOSSES, 4, 64, 40000) == pytest.approx(BANDIT_64_4_40000, rel=1e-14)
    assert theoretical_bound(Setting.ADAPTIVE_LOSSES, 8, 50, 20000) == pytest.approx(ADAPTIVE_LOSSES_50_8_20000, rel=1e-14)
    assert theoretical_bound(Setting.ADAPTIVE_GAINS, 8, 50, 20000) == pytest.approx(ADAPTIVE_GAINS_8_20000, rel=1e-14)
    assert theoretical_bound(Setting.BANDIT_LOSSES_LOWER, 2, 8, 10000) == pytest.approx(BANDIT_LOWER_2_10000, rel=1e-14)


@pytest.mark.parametrize(
    "setting,s,d,T,what",
    [
        (Setting.FULL_INFO_GAINS, 2, 10, 100, "s >= 3"),
        (Setting.BANDIT_LOSSES, 2, 8, 100, "d/s >= e^2"),
        (Setting.BANDIT_LOSSES_LOWER, 2, 8, 7, "T >= d^2"),
        (Setting.BANDIT_LOSSES_LOWER, 1, 1, 7, "d >= 2"),
        (Setting.FULL_INFO_LOSSES, 6, 5, 100, "1 <= s <= d"),
    ],
)
def test_preconditions_are_named(setting, s, d, T, what):
    with pytest.raises(BoundPreconditionError, match=re.escape(what)):
        theoretical_bound(setting, s, d, T)


def test_lower_bound_horizon_edge_is_accepted():
    assert theoretical_bound(Setting.BANDIT_LOSSES_LOWER, 2, 8, 8) == pytest.approx(math.sqrt(16) / 32)


def test_small_sparsity_gains_bounds():
    assert full_info_gains_bound(1, 100) == 10.0
    assert full_info_gains_bound(2, 50) == 10.0
    assert full_info_gains_bound(4, 10000) == pytest.approx(GAINS_S4_T1E4, rel=1e-14)


def test_general_bandit_bound_reduces_to_the_tuned_one():
    q = math.log(16)
    eta = math.sqrt(2 * 64 ** (1 / q) / ((q - 1) * 40000 * 4 ** (1 - 1 / q)))
    general = bandit_general_bound(q, eta, 4, 64, 40000)
    # at the balanced step size both terms coincide
    assert general == pytest.approx(2 * q * 64 ** (1 / q) / (eta * (q - 1)), rel=1e-12)
    assert general <= theoretical_bound(Setting.BANDIT_LOSSES, 4, 64, 40000)


def test_table():
    table = bound_table(64, 4, 40000)
    assert list(table) == ["full-info-gains", "full-info-losses", "bandit-losses-upper", "bandit-losses-lower"]
    assert table["bandit-losses-upper"] == pytest.approx(2196.0, abs=0.5)
    assert table["bandit-losses-lower"] == 12.5
    assert table["full-info-gains"] == pytest.approx(math.sqrt(2 * math.e * 40000 * math.log(4)), rel=1e-14)
    assert bound_table(10, 1, 100)["full-info-gains"] == 10.0
    assert bound_table(8, 2, 100)["bandit-losses-upper"] is None
    with pytest.raises(BoundPreconditionError):
        bound_table(4, 5, 10)
