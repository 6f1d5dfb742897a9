"""Noise schedules, the forward process, and deterministic DDIM stepping.

Convention used everywhere in this package: ``alpha_t`` is the signal
retention coefficient, so the forward process reads

    x_t = alpha_t * x_0 + sqrt(1 - alpha_t**2) * eps,      eps ~ N(0, I)

with alpha_1 close to 1 (nearly clean) and alpha_T close to 0 (nearly pure
noise).  This equals sqrt(alpha_bar_t) in the common DDPM parameterization.
``alpha_at(0)`` is defined as exactly 1.0 so the final DDIM step lands on the
clean prediction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import torch

INTERPOLATIONS = ("linear_in_alpha_sq", "cosine")


class DiffusionError(ValueError):
    pass


@dataclass(frozen=True)
class DiffusionSchedule:
    """A monotone alpha_1..alpha_T sequence plus the DDIM stochasticity knob.

    ``alpha`` entries must lie in [0, 1] and be non-increasing.  Schedules
    built by :func:`make_schedule` additionally keep every entry strictly
    positive; a zero tail is representable only so the division-by-zero error
    path of :func:`ddim_step` can be exercised.
    """

    alpha: torch.Tensor
    eta: float = 0.0
    interpolation: str = "linear_in_alpha_sq"

    def __post_init__(self) -> None:
        alpha = torch.as_tensor(self.alpha, dtype=torch.float64).flatten()
        object.__setattr__(self, "alpha", alpha)
        if alpha.numel() < 1:
            raise DiffusionError("schedule needs at least one step")
        if bool((alpha < 0).any()) or bool((alpha > 1).any()):
            raise DiffusionError("alpha values must lie in [0, 1]")
        if bool((alpha[1:] > alpha[:-1]).any()):
            raise DiffusionError("alpha sequence must be non-increasing")
        if not (0.0 <= self.eta <= 1.0):
            raise DiffusionError(f"eta must be in [0, 1], got {self.eta}")

    @property
    def T(self) -> int:
        return int(self.alpha.numel())

    def alpha_at(self, t: int) -> float:
        """alpha_t for t in 0..T, with alpha_0 := 1 (clean data)."""
        if not 0 <= t <= self.T:
            raise DiffusionError(f"t={t} outside 0..{self.T}")
        return 1.0 if t == 0 else float(self.alpha[t - 1])

    def terminal_is_gaussian(self, threshold: float = 1e-3) -> bool:
        """Whether x_T is statistically indistinguishable from unit noise
        (checked as alpha_T**2 < threshold)."""
        return float(self.alpha[-1]) ** 2 < threshold

    def to_json(self) -> str:
        return json.dumps(
            {
                "T": self.T,
                "alpha": [float(a) for a in self.alpha],
                "eta": self.eta,
                "interpolation": self.interpolation,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "DiffusionSchedule":
        doc = json.loads(text)
        alpha = torch.tensor(doc["alpha"], dtype=torch.float64)
        if doc.get("T") is not None and int(doc["T"]) != alpha.numel():
            raise DiffusionError("schedule document T does not match alpha length")
        return cls(alpha=alpha, eta=float(doc.get("eta", 0.0)),
                   interpolation=doc.get("interpolation", "linear_in_alpha_sq"))


def make_schedule(
    T: int,
    alpha_start: float = 0.9999,
    alpha_end: float = 0.02,
    interpolation: str = "linear_in_alpha_sq",
    eta: float = 0.0,
) -> DiffusionSchedule:
    """Build a schedule with alpha_1 = alpha_start and alpha_T = alpha_end.

    ``linear_in_alpha_sq`` interpolates alpha**2 linearly between the squared
    endpoints; ``cosine`` eases alpha**2 along cos(pi*u/2)**2.  Endpoints must
    satisfy 0 < alpha_end <= alpha_start <= 1 (equal endpoints give a constant
    schedule, e.g. the degenerate T=1 no-noise case).
    """
    if not isinstance(T, int) or T < 1:
        raise DiffusionError(f"T must be an integer >= 1, got {T!r}")
    if interpolation not in INTERPOLATIONS:
        raise DiffusionError(f"unknown interpolation {interpolation!r}")
    if not (0.0 < alpha_end <= alpha_start <= 1.0):
        raise DiffusionError(
            f"need 0 < alpha_end <= alpha_start <= 1, got ({alpha_start}, {alpha_end})"
        )
    s2, e2 = alpha_start**2, alpha_end**2
    if T == 1:
        alpha_sq = torch.tensor([s2], dtype=torch.float64)
    else:
        u = torch.linspace(0.0, 1.0, T, dtype=torch.float64)
        if interpolation == "linear_in_alpha_sq":
            alpha_sq = s2 + (e2 - s2) * u
        else:
            alpha_sq = e2 + (s2 - e2) * torch.cos(torch.pi * u / 2) ** 2
    return DiffusionSchedule(alpha=torch.sqrt(alpha_sq), eta=eta, interpolation=interpolation)


def default_schedule(T: int = 1000) -> DiffusionSchedule:
    return make_schedule(T=T, alpha_start=0.9999, alpha_end=0.02)


def forward_diffuse(
    x0: torch.Tensor, t: int, eps: torch.Tensor, schedule: DiffusionSchedule
) -> torch.Tensor:
    """x_t = alpha_t * x0 + sqrt(1 - alpha_t**2) * eps, elementwise."""
    if eps.shape != x0.shape:
        raise DiffusionError(f"eps shape {tuple(eps.shape)} != x0 shape {tuple(x0.shape)}")
    if not 1 <= t <= schedule.T:
        raise DiffusionError(f"t={t} outside 1..{schedule.T}")
    a = schedule.alpha_at(t)
    sigma = (1.0 - a * a) ** 0.5
    return x0 * x0.new_tensor(a) + eps * eps.new_tensor(sigma)


def denoise_loss(
    model: Callable[[torch.Tensor, int], torch.Tensor],
    x0: torch.Tensor,
    t: int,
    eps: torch.Tensor,
    schedule: DiffusionSchedule,
) -> torch.Tensor:
    """Noise-prediction objective: mean squared error between eps and
    model(x_t, t), averaged over all elements and the batch."""
    x_t = forward_diffuse(x0, t, eps, schedule)
    eps_hat = model(x_t, t)
    if eps_hat.shape != eps.shape:
        raise DiffusionError("model output shape does not match the noise shape")
    return ((eps - eps_hat) ** 2).mean()


def ddim_step(
    x_t: torch.Tensor,
    eps_hat: torch.Tensor,
    t: int,
    t_prev: int,
    schedule: DiffusionSchedule,
    clip_x0: Optional[tuple[float, float]] = None,
) -> torch.Tensor:
    """One deterministic DDIM update from step t to step t_prev (< t).

    Predicts the clean sample x0_hat = (x_t - sqrt(1-alpha_t**2)*eps_hat)/alpha_t,
    then re-noises it to the t_prev level.  When alpha_{t_prev} == alpha_t the
    update is the exact identity and x_t is returned unchanged.

    ``clip_x0`` enables static thresholding: x0_hat is clamped to the given
    range and the noise direction re-derived from the clamped estimate.  The
    default None leaves the exact (invertible) update untouched.
    """
    if eps_hat.shape != x_t.shape:
        raise DiffusionError("eps_hat shape does not match x_t")
    if not 1 <= t <= schedule.T:
        raise DiffusionError(f"t={t} outside 1..{schedule.T}")
    if not 0 <= t_prev <= t:
        raise DiffusionError(f"t_prev={t_prev} must satisfy 0 <= t_prev <= t={t}")
    if schedule.eta != 0.0:
        raise DiffusionError("stochastic DDIM (eta > 0) is not supported")
    a_t = schedule.alpha_at(t)
    a_prev = schedule.alpha_at(t_prev)
    if a_prev == a_t:
        return x_t.clone()
    if a_t == 0.0:
        raise DiffusionError(f"alpha_t is zero at t={t}; x0 prediction would divide by zero")
    sigma_t = (1.0 - a_t * a_t) ** 0.5
    sigma_prev = (1.0 - a_prev * a_prev) ** 0.5
    x0_hat = (x_t - eps_hat * x_t.new_tensor(sigma_t)) / a_t
    if clip_x0 is not None:
        x0_hat = x0_hat.clamp(clip_x0[0], clip_x0[1])
        eps_hat = (x_t - x0_hat * x_t.new_tensor(a_t)) / max(sigma_t, 1e-12)
    return x0_hat * x_t.new_tensor(a_prev) + eps_hat * x_t.new_tensor(sigma_prev)


def sample_timesteps(T: int, steps: int) -> list[int]:
    """Evenly spaced sub-schedule T = tau_steps > ... > tau_1 > tau_0 = 0."""
    if not 1 <= steps <= T:
        raise DiffusionError(f"steps={steps} must satisfy 1 <= steps <= T={T}")
    taus = [round(T * k / steps) for k in range(steps, -1, -1)]
    if len(set(taus)) != len(taus):
        raise DiffusionError(f"sub-schedule for steps={steps} collapsed; reduce steps")
    return taus


def ddim_sample(
    model: Callable[..., torch.Tensor],
    shape: Sequence[int],
    steps: int,
    schedule: DiffusionSchedule,
    seed: int,
    cond: Optional[object] = None,
    clip_x0: Optional[tuple[float, float]] = None,
) -> torch.Tensor:
    """Run the full deterministic DDIM trajectory from seeded Gaussian noise.

    ``model(x, t)`` (or ``model(x, t, cond)`` when a conditioner is given)
    must return the noise prediction at step t.  Identical (seed, model,
    schedule, steps, cond) always produce the identical sample.  ``clip_x0``
    is forwarded to each ddim_step.
    """
    taus = sample_timesteps(schedule.T, steps)
    gen = torch.Generator(device="cpu").manual_seed(int(seed) & (2**64 - 1))
    x = torch.randn(tuple(shape), generator=gen, dtype=torch.float32)
    for i in range(len(taus) - 1):
        t, t_prev = taus[i], taus[i + 1]
        eps_hat = model(x, t) if cond is None else model(x, t, cond)
        x = ddim_step(x, eps_hat, t, t_prev, schedule, clip_x0=clip_x0)
    return x
