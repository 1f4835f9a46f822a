"""Pipeline-ADC power bound, architecture-factor base-station power, efficiency."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

from .errors import InvalidParameterError, InvalidStateError

# Coefficients in J per conversion step (W/Hz). With omega = 100 and
# f_s = 20 MHz they give P_ADC(2) = 15 uW, i.e. 2*M*P_ADC = 3 mW at M = 100.
# At b = 2 the b and b**2 terms carry 80% / 19% of the bound and the two
# 2**(2b) terms 1% together, so the linear terms dominate at low resolution
# and the exponential ones take over from b ~ 6 upwards.
DEFAULT_C1 = 3.0e-15
DEFAULT_C2 = 3.5625e-16
DEFAULT_C3 = 1.5625e-18
DEFAULT_C4 = 1.5625e-18
DEFAULT_OMEGA = 100.0
DEFAULT_FS = 20e6
DEFAULT_B_REF = 2

# Above this rate measured ADCs stop scaling linearly with f_s.
MAX_LINEAR_FS = 400e6


@dataclass(frozen=True)
class AdcPowerParams:
    omega: float = DEFAULT_OMEGA
    c1: float = DEFAULT_C1
    c2: float = DEFAULT_C2
    c3: float = DEFAULT_C3
    c4: float = DEFAULT_C4
    f_s: float = DEFAULT_FS

    def __post_init__(self):
        problems = []
        if not self.omega > 0:
            problems.append(f"omega must be positive, got {self.omega}")
        cs = (self.c1, self.c2, self.c3, self.c4)
        if any(c < 0 for c in cs) or not any(c > 0 for c in cs):
            problems.append(f"coefficients must be >= 0 with one positive, got {cs}")
        if not self.f_s > 0:
            problems.append(f"sampling rate must be positive, got {self.f_s}")
        if problems:
            raise InvalidParameterError("; ".join(problems))

    def with_fs(self, f_s: float) -> AdcPowerParams:
        return AdcPowerParams(self.omega, self.c1, self.c2, self.c3, self.c4, f_s)


@dataclass(frozen=True)
class PowerBudget:
    p_adc_single: float
    p_adc_total: float
    p_rest: float
    p_tot: float
    alpha: float
    b_ref: int = DEFAULT_B_REF


@dataclass(frozen=True)
class EfficiencyResult:
    sumrate: float
    p_tot: float
    eta: float


def adc_power(b: int, params: AdcPowerParams = AdcPowerParams()) -> float:
    """Power of one converter in W."""
    if b < 1:
        raise InvalidParameterError(f"bit resolution must be >= 1, got {b}")
    if params.f_s > MAX_LINEAR_FS:
        warnings.warn(
            f"f_s = {params.f_s:.3g} Hz exceeds {MAX_LINEAR_FS:.0e} Hz; "
            "the linear-in-f_s power model is not validated there",
            RuntimeWarning,
            stacklevel=2,
        )
    e = 4.0**b
    bound = params.c1 * b + params.c2 * b * b + params.c3 * e + params.c4 * b * e
    return params.omega * bound * params.f_s


def total_power(
    M: int,
    b: int,
    alpha: float,
    params: AdcPowerParams = AdcPowerParams(),
    b_ref: int = DEFAULT_B_REF,
) -> PowerBudget:
    """Base-station power with ``2M`` converters (I and Q per chain)."""
    if M < 1:
        raise InvalidParameterError(f"antenna count must be >= 1, got {M}")
    if alpha < 0:
        raise InvalidParameterError(f"architecture factor must be >= 0, got {alpha}")
    single = adc_power(b, params)
    ref = adc_power(b_ref, params)
    p_rest = alpha * 2 * M * ref
    adcs = 2 * M * single
    return PowerBudget(single, adcs, p_rest, adcs + p_rest, alpha, b_ref)


def architecture_factor(
    p_rest: float, M: int, params: AdcPowerParams = AdcPowerParams(), b_ref: int = DEFAULT_B_REF
) -> float:
    """Non-ADC power normalised by the ADC power of all chains at ``b_ref``."""
    return p_rest / (2 * M * adc_power(b_ref, params))


def energy_efficiency(sumrate: float, budget: PowerBudget) -> EfficiencyResult:
    if not budget.p_tot > 0:
        raise InvalidStateError(f"total power must be positive, got {budget.p_tot}")
    return EfficiencyResult(sumrate, budget.p_tot, sumrate / budget.p_tot)
