"""Central finite-difference gradient checking against autograd.

The loss is a fixed random linear projection of the module output, so the
full Jacobian is exercised through a scalar. Comparisons use a relative L2
criterion, which is robust to individual near-zero gradient entries.
"""

from __future__ import annotations

from typing import Callable

import torch


def scalar_fn(fn: Callable[[], torch.Tensor], proj: torch.Tensor) -> float:
    """Project the current output to a float64 scalar."""
    out = fn()
    return float((out.double() * proj.double()).sum())


def central_fd_grad(fn: Callable[[], torch.Tensor], x: torch.Tensor,
                    proj: torch.Tensor, h: float) -> torch.Tensor:
    """d/dx of scalar_fn, elementwise central differences, x mutated in place."""
    grad = torch.zeros_like(x, dtype=torch.float64)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    with torch.no_grad():
        for i in range(flat.numel()):
            orig = float(flat[i])
            flat[i] = orig + h
            fp = scalar_fn(fn, proj)
            flat[i] = orig - h
            fm = scalar_fn(fn, proj)
            flat[i] = orig
            gflat[i] = (fp - fm) / (2.0 * h)
    return grad


def autograd_grad(fn: Callable[[], torch.Tensor], x: torch.Tensor,
                  proj: torch.Tensor) -> torch.Tensor:
    x.requires_grad_(True)
    if x.grad is not None:
        x.grad = None
    loss = (fn().double() * proj.double()).sum()
    loss.backward()
    g = x.grad.detach().clone()
    x.requires_grad_(False)
    return g


def rel_l2(a: torch.Tensor, b: torch.Tensor) -> float:
    num = float((a.double() - b.double()).norm())
    den = float(a.double().norm()) + float(b.double().norm())
    if den == 0.0:
        return 0.0
    return num / den


def check_gradients(fn: Callable[[], torch.Tensor], inputs: list[torch.Tensor],
                    h: float | tuple[float, ...], tol: float, seed: int = 0) -> list[float]:
    """Compare autograd and FD gradients of fn w.r.t. each input tensor.

    FD truncation error falls with the step while round-off error grows, so
    when several step sizes are given the best one per input is scored.
    Returns the relative errors (and asserts each is within tol) so callers
    can report them.
    """
    steps = (h,) if isinstance(h, float) else tuple(h)
    gen = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        proj = torch.randn(fn().shape, generator=gen)
    errors = []
    for x in inputs:
        g_ad = autograd_grad(fn, x, proj)
        err = min(rel_l2(g_ad, central_fd_grad(fn, x, proj, step)) for step in steps)
        assert err <= tol, f"gradient mismatch: rel L2 {err:.3e} > {tol:.0e}"
        errors.append(err)
    return errors
