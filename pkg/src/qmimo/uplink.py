"""Monte Carlo engine for the quantized massive-MIMO uplink.

Signal chain per coherence block: i.i.d. Rayleigh channel, AGC with a fixed
power gain, ``b``-bit I/Q quantization, least-squares estimation from DFT
pilots and MRC or ZF combining. Quantization is either replaced by additive
pseudo-quantization noise (``mode="pqn"``) or simulated sample by sample with
the actual quantizer (``mode="hardware"``), which serves as an oracle for the
PQN abstraction.

Each trial draws from its own counter-based stream in a fixed order:

1. small-scale fading, ``M x K x 2`` standard normals;
2. pilot-phase thermal noise, ``M x tau x 2`` standard normals;
3. pilot-phase PQN, ``M x tau x 2`` uniforms on ``[0, 1)``;
4. hardware mode only: data symbols ``K x n_data x 2`` and data-phase thermal
   noise ``M x n_data x 2``, standard normals.

Steps 1-3 are drawn in both modes and for every resolution, so runs that
differ only in ``b``, ``mode`` or receiver see the same underlying draws.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace

import numpy as np
from scipy.special import ndtri

from .errors import InvalidParameterError, SimulationError, SingularChannelError
from .quantizer import make_quantizer, quantize
from .rng import trial_generator

RECEIVERS = ("mrc", "zf")
MODES = ("pqn", "hardware")
PQN_NOISE = ("uniform", "gaussian")
COND_LIMIT = 1e12
# complex entries per trial chunk; bounds memory without affecting results
_CHUNK_ELEMENTS = 1_500_000


@dataclass(frozen=True)
class UplinkConfig:
    M: int
    K: int
    T: int
    tau: int
    p_u: float
    p_n: float = 1.0
    b: int = 8
    receiver: str = "zf"
    B: float = 20e6
    mode: str = "pqn"
    beta: tuple = ()
    mu: float | None = None
    pqn_noise: str = "uniform"
    n_data_symbols: int = 256

    def __post_init__(self):
        if not self.beta:
            object.__setattr__(self, "beta", (1.0,) * int(self.K))
        else:
            object.__setattr__(self, "beta", tuple(float(x) for x in self.beta))
        object.__setattr__(self, "receiver", str(self.receiver).lower())
        object.__setattr__(self, "mode", str(self.mode).lower())
        problems = self.problems()
        if problems:
            raise InvalidParameterError("; ".join(problems))

    @classmethod
    def from_snr_db(cls, snr_db: float, p_n: float = 1.0, **kw) -> UplinkConfig:
        return cls(p_u=p_n * 10 ** (snr_db / 10), p_n=p_n, **kw)

    @property
    def snr(self) -> float:
        return self.p_u / self.p_n

    @property
    def backoff(self) -> float:
        """AGC backoff; the shipped calibration chord unless set explicitly."""
        if self.mu is not None:
            return self.mu
        from .calibration import default_calibration

        return default_calibration().chord(self.b)

    @property
    def p_q(self) -> float:
        """Complex quantization-noise variance per chain at ``X_ol = 1``."""
        return (2.0 / 3.0) * 2.0 ** (-2 * self.b)

    def problems(self) -> list[str]:
        out = []
        M, K, T, tau = self.M, self.K, self.T, self.tau
        for name in ("M", "K", "T", "tau", "b", "n_data_symbols"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                out.append(f"{name} must be a positive integer, got {v!r}")
        if not M >= K:
            out.append(f"need M >= K, got M={M}, K={K}")
        if not K <= tau <= T:
            out.append(f"need K <= tau <= T, got K={K}, tau={tau}, T={T}")
        if not self.p_u > 0:
            out.append(f"p_u must be positive, got {self.p_u}")
        if not self.p_n > 0:
            out.append(f"p_n must be positive, got {self.p_n}")
        if len(self.beta) != K:
            out.append(f"beta needs K={K} entries, got {len(self.beta)}")
        if any(not x > 0 for x in self.beta):
            out.append("all large-scale gains beta must be positive")
        if self.receiver not in RECEIVERS:
            out.append(f"receiver must be one of {RECEIVERS}, got {self.receiver!r}")
        if self.mode not in MODES:
            out.append(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.pqn_noise not in PQN_NOISE:
            out.append(f"pqn_noise must be one of {PQN_NOISE}, got {self.pqn_noise!r}")
        if not self.B > 0:
            out.append(f"bandwidth must be positive, got {self.B}")
        if self.mu is not None and not self.mu > 0:
            out.append(f"backoff mu must be positive, got {self.mu}")
        return out

    def replace(self, **changes) -> UplinkConfig:
        return replace(self, **changes)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class AgcState:
    gamma: float
    mu_used: float


@dataclass(frozen=True)
class ChannelRealization:
    H: np.ndarray
    Htilde: np.ndarray


@dataclass(frozen=True)
class PilotBlock:
    Psi: np.ndarray
    Phi: np.ndarray
    pinv: np.ndarray


@dataclass
class TrialWorkspace:
    Hhat: np.ndarray
    A_true: np.ndarray
    A_hat: np.ndarray
    p_q: float
    p_n_eff: float
    sinqr: np.ndarray | None = None


@dataclass
class SignalTrace:
    x: np.ndarray
    y: np.ndarray
    ytilde: np.ndarray
    z: np.ndarray
    n: np.ndarray
    q: np.ndarray
    xhat: np.ndarray
    w: np.ndarray


@dataclass
class SumrateResult:
    receiver: str
    sumrate: float
    mean_sinqr: np.ndarray
    trials_used: int
    trials_discarded: int
    rates: np.ndarray = field(repr=False, default=None)


def agc_gain(mu_star: float, p_u: float, beta, p_n: float) -> AgcState:
    """Per I/Q branch power gain that puts the quantizer input at backoff ``mu_star``.

    The received power ``p_u * sum(beta) + p_n`` is averaged over small- and
    large-scale fading, so the gain is the same for every chain.
    """
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    if not (mu_star > 0 and p_u > 0 and p_n > 0) or np.any(beta <= 0):
        raise InvalidParameterError("AGC inputs must all be positive")
    return AgcState(2.0 / (mu_star * (p_u * beta.sum() + p_n)), float(mu_star))


def _complex_normal(std: np.ndarray) -> np.ndarray:
    """Unit-variance circular complex normals from a ``(..., 2)`` real array."""
    return (std[..., 0] + 1j * std[..., 1]) * (1 / math.sqrt(2))


def _effective_channel(H, gamma, beta):
    return H * (math.sqrt(gamma) * np.sqrt(np.asarray(beta, dtype=float)))


def draw_channel(M: int, K: int, beta, agc: AgcState, rng: np.random.Generator) -> ChannelRealization:
    H = _complex_normal(rng.standard_normal((M, K, 2)))
    return ChannelRealization(H, _effective_channel(H, agc.gamma, beta))


def generate_pilots(K: int, tau: int, p_u: float) -> PilotBlock:
    """First ``K`` rows of the normalised ``tau``-point DFT matrix, scaled to ``p_u``.

    Every pilot entry has magnitude ``sqrt(p_u)``, so the pilot phase drives the
    AGC and quantizer at the same average power as data transmission.
    """
    if tau < K:
        raise InvalidParameterError(f"training length tau={tau} shorter than K={K}")
    if K < 1 or not p_u > 0:
        raise InvalidParameterError("need K >= 1 and p_u > 0")
    k = np.arange(K)[:, None]
    t = np.arange(tau)[None, :]
    Psi = np.exp(-2j * np.pi * k * t / tau) / math.sqrt(tau)
    Phi = math.sqrt(p_u * tau) * Psi
    pinv = Psi.conj().T / math.sqrt(p_u * tau)
    return PilotBlock(Psi, Phi, pinv)


def _quantize_complex(b: int, y: np.ndarray) -> np.ndarray:
    spec = make_quantizer(b, 1.0)
    return quantize(spec, y.real) + 1j * quantize(spec, y.imag)


def _pqn_samples(u: np.ndarray, p_q: float, shape: str) -> np.ndarray:
    """Complex PQN with variance ``p_q`` from ``(..., 2)`` uniforms on [0, 1)."""
    if shape == "uniform":
        real = (2 * u - 1) * math.sqrt(1.5 * p_q)
    else:
        real = ndtri(u + 2.0**-54) * math.sqrt(p_q / 2)
    return real[..., 0] + 1j * real[..., 1]


def _estimate(cfg, Htilde, pilots, gamma, n_std, u_std, mode):
    """LS estimate from pre-drawn standard noise; broadcasts over leading axes."""
    clean = Htilde @ pilots.Phi
    noise = _complex_normal(n_std) * math.sqrt(gamma * cfg.p_n)
    if mode == "hardware":
        Z = _quantize_complex(cfg.b, clean + noise)
    else:
        Z = clean + noise + _pqn_samples(u_std, cfg.p_q, cfg.pqn_noise)
    return Z @ pilots.pinv


def estimate_channel(cfg: UplinkConfig, Htilde, pilots: PilotBlock, rng, mode=None, agc=None):
    """Least-squares channel estimate ``Z Phi^+`` from one pilot block.

    In PQN mode the pilot observation is ``Htilde Phi + N + Xi`` with ``Xi``
    white, independent of the input, of variance ``p_q``; in hardware mode it is
    the quantizer output for ``Htilde Phi + N``.
    """
    mode = mode or cfg.mode
    if mode not in MODES:
        raise InvalidParameterError(f"unknown mode {mode!r}")
    Htilde = np.asarray(Htilde)
    M, K = Htilde.shape[-2:]
    if K != pilots.Phi.shape[0]:
        raise InvalidParameterError(f"channel has {K} users, pilots {pilots.Phi.shape[0]}")
    tau = pilots.Phi.shape[1]
    agc = agc or agc_gain(cfg.backoff, cfg.p_u, cfg.beta, cfg.p_n)
    n_std = rng.standard_normal((M, tau, 2))
    u_std = rng.random((M, tau, 2))
    return _estimate(cfg, Htilde, pilots, agc.gamma, n_std, u_std, mode)


def _zf_batch(Hmat):
    """ZF matrices and a mask of Gram matrices within the condition limit."""
    gram = np.conj(np.swapaxes(Hmat, -1, -2)) @ Hmat
    ev = np.linalg.eigvalsh(gram)
    ok = (ev[..., 0] > 0) & (ev[..., -1] <= COND_LIMIT * np.where(ev[..., 0] > 0, ev[..., 0], 1.0))
    safe = np.where(ok[..., None, None], gram, np.eye(gram.shape[-1]))
    # gram is Hermitian, so H (H^H H)^-1 needs no conjugate transposes
    return Hmat @ np.linalg.inv(safe), ok


def receiver_matrix(Hmat, receiver: str):
    """Combining matrix ``A`` (the estimate is ``A^H z``) for MRC or ZF."""
    Hmat = np.asarray(Hmat, dtype=complex)
    receiver = receiver.lower()
    if receiver == "mrc":
        return Hmat.copy()
    if receiver != "zf":
        raise InvalidParameterError(f"unknown receiver {receiver!r}")
    if Hmat.shape[-2] < Hmat.shape[-1]:
        raise InvalidParameterError("ZF needs at least as many antennas as users")
    A, ok = _zf_batch(Hmat)
    if not np.all(ok):
        raise SingularChannelError(f"Gram matrix condition number exceeds {COND_LIMIT:g}")
    return A


def _sinqr_terms(A_true, A_hat, Htilde, p_u, noise_var):
    G = np.conj(np.swapaxes(A_hat, -1, -2)) @ Htilde
    wanted = np.einsum("...mk,...mk->...k", np.conj(A_true), Htilde)
    g_diag = np.diagonal(G, axis1=-2, axis2=-1)
    interference = p_u * (np.sum(np.abs(G) ** 2, axis=-1) - np.abs(g_diag) ** 2)
    mismatch = p_u * np.abs(g_diag - wanted) ** 2
    norm_a = np.sum(np.abs(A_hat) ** 2, axis=-2)
    signal = p_u * np.abs(wanted) ** 2
    return signal, interference + mismatch + norm_a * noise_var


def sinqr_semi_analytic(trial: TrialWorkspace, Htilde, cfg: UplinkConfig) -> np.ndarray:
    """Per-user SINQR given the realization, averaged over symbols and noise.

    The wanted term uses the combiner built from the true channel; the combiner
    mismatch, interuser interference and the thermal plus quantization noise
    behind the estimated combiner are treated as uncorrelated noise.
    """
    signal, noise = _sinqr_terms(
        trial.A_true, trial.A_hat, np.asarray(Htilde), cfg.p_u, trial.p_n_eff + trial.p_q
    )
    return signal / noise


def build_trial(cfg: UplinkConfig, Htilde, Hhat, agc: AgcState) -> TrialWorkspace:
    trial = TrialWorkspace(
        Hhat=Hhat,
        A_true=receiver_matrix(Htilde, cfg.receiver),
        A_hat=receiver_matrix(Hhat, cfg.receiver),
        p_q=cfg.p_q,
        p_n_eff=agc.gamma * cfg.p_n,
    )
    trial.sinqr = sinqr_semi_analytic(trial, Htilde, cfg)
    return trial


def _data_phase(cfg, Htilde, A_true, A_hat, gamma, x_std, n_std, keep_trace=False):
    """Empirical SINQR by pushing data symbols through the real quantizer."""
    x = _complex_normal(x_std)
    n_raw = _complex_normal(n_std) * math.sqrt(cfg.p_n)
    y = math.sqrt(cfg.p_u) * (Htilde / math.sqrt(gamma)) @ x + n_raw
    ytilde = math.sqrt(gamma) * y
    z = _quantize_complex(cfg.b, ytilde)
    xhat = np.conj(np.swapaxes(A_hat, -1, -2)) @ z
    wanted = np.einsum("...mk,...mk->...k", np.conj(A_true), Htilde)
    w = xhat - math.sqrt(cfg.p_u) * wanted[..., :, None] * x
    sinqr = cfg.p_u * np.abs(wanted) ** 2 / np.mean(np.abs(w) ** 2, axis=-1)
    if not keep_trace:
        return sinqr, None
    return sinqr, SignalTrace(x, y, ytilde, z, math.sqrt(gamma) * n_raw, z - ytilde, xhat, w)


def empirical_sinqr(cfg: UplinkConfig, Htilde, trial: TrialWorkspace, rng, n_symbols: int,
                    agc: AgcState | None = None):
    """Hardware-oracle SINQR on one realization and the signal trace behind it."""
    agc = agc or agc_gain(cfg.backoff, cfg.p_u, cfg.beta, cfg.p_n)
    M, K = np.shape(Htilde)
    x_std = rng.standard_normal((K, n_symbols, 2))
    n_std = rng.standard_normal((M, n_symbols, 2))
    return _data_phase(cfg, np.asarray(Htilde), trial.A_true, trial.A_hat, agc.gamma,
                       x_std, n_std, keep_trace=True)


def _draw_chunk(cfg, seed, start, stop):
    M, K, tau, nd = cfg.M, cfg.K, cfg.tau, cfg.n_data_symbols
    n = stop - start
    h = np.empty((n, M, K, 2))
    npil = np.empty((n, M, tau, 2))
    upil = np.empty((n, M, tau, 2))
    hw = cfg.mode == "hardware"
    if hw:
        xd = np.empty((n, K, nd, 2))
        nd_ = np.empty((n, M, nd, 2))
    for i, t in enumerate(range(start, stop)):
        g = trial_generator(seed, t)
        g.standard_normal(out=h[i])
        g.standard_normal(out=npil[i])
        g.random(out=upil[i])
        if hw:
            g.standard_normal(out=xd[i])
            g.standard_normal(out=nd_[i])
    return h, npil, upil, (xd, nd_) if hw else None


def simulate_uplink(cfg: UplinkConfig, n_trials: int, seed: int, receivers=None) -> dict:
    """Per-receiver ergodic sumrate over ``n_trials`` channel realizations.

    All receivers are evaluated on the same draws. ZF trials whose Gram matrix
    (true or estimated) is ill-conditioned are discarded and counted.
    """
    if n_trials < 1:
        raise InvalidParameterError(f"need at least one trial, got {n_trials}")
    receivers = tuple(r.lower() for r in (receivers or (cfg.receiver,)))
    for r in receivers:
        if r not in RECEIVERS:
            raise InvalidParameterError(f"unknown receiver {r!r}")
    agc = agc_gain(cfg.backoff, cfg.p_u, cfg.beta, cfg.p_n)
    pilots = generate_pilots(cfg.K, cfg.tau, cfg.p_u)
    noise_var = agc.gamma * cfg.p_n + cfg.p_q
    per_trial = max(cfg.M * max(cfg.K, cfg.tau), cfg.M * cfg.n_data_symbols if cfg.mode == "hardware" else 0)
    chunk = max(1, _CHUNK_ELEMENTS // per_trial)

    rates = {r: np.full((n_trials, cfg.K), np.nan) for r in receivers}
    sinqrs = {r: np.full((n_trials, cfg.K), np.nan) for r in receivers}
    for start in range(0, n_trials, chunk):
        stop = min(n_trials, start + chunk)
        h_std, n_std, u_std, data = _draw_chunk(cfg, seed, start, stop)
        Htilde = _effective_channel(_complex_normal(h_std), agc.gamma, cfg.beta)
        Hhat = _estimate(cfg, Htilde, pilots, agc.gamma, n_std, u_std, cfg.mode)
        for r in receivers:
            if r == "mrc":
                A_true, A_hat = Htilde, Hhat
                ok = np.ones(stop - start, dtype=bool)
            else:
                A_true, ok_t = _zf_batch(Htilde)
                A_hat, ok_h = _zf_batch(Hhat)
                ok = ok_t & ok_h
            if cfg.mode == "hardware":
                s, _ = _data_phase(cfg, Htilde, A_true, A_hat, agc.gamma, *data)
            else:
                sig, noi = _sinqr_terms(A_true, A_hat, Htilde, cfg.p_u, noise_var)
                s = sig / noi
            s = np.where(ok[:, None], s, np.nan)
            sinqrs[r][start:stop] = s
            rates[r][start:stop] = np.log2(1 + s)

    out = {}
    prefactor = cfg.B * (cfg.T - cfg.tau) / cfg.T
    for r in receivers:
        kept = ~np.isnan(rates[r][:, 0])
        used = int(kept.sum())
        if used == 0:
            raise SimulationError(f"all {n_trials} trials discarded as singular ({r})")
        per_trial_sum = rates[r][kept].sum(axis=1)
        out[r] = SumrateResult(
            receiver=r,
            sumrate=float(prefactor * np.mean(per_trial_sum)),
            mean_sinqr=sinqrs[r][kept].mean(axis=0),
            trials_used=used,
            trials_discarded=n_trials - used,
            rates=per_trial_sum,
        )
    return out


def ergodic_sumrate(cfg: UplinkConfig, n_trials: int, seed: int) -> float:
    """``B (T - tau)/T`` times the mean over trials of ``sum_k log2(1 + SINQR_k)``."""
    return simulate_uplink(cfg, n_trials, seed)[cfg.receiver].sumrate


def trial_workspace(cfg: UplinkConfig, seed: int, trial: int = 0):
    """Rebuild one trial of :func:`simulate_uplink` for inspection.

    Returns ``(channel, workspace)`` using exactly the draws trial ``trial``
    would use in a run with the same ``seed``.
    """
    agc = agc_gain(cfg.backoff, cfg.p_u, cfg.beta, cfg.p_n)
    pilots = generate_pilots(cfg.K, cfg.tau, cfg.p_u)
    rng = trial_generator(seed, trial)
    chan = draw_channel(cfg.M, cfg.K, cfg.beta, agc, rng)
    Hhat = estimate_channel(cfg, chan.Htilde, pilots, rng, agc=agc)
    return chan, build_trial(cfg, chan.Htilde, Hhat, agc)
