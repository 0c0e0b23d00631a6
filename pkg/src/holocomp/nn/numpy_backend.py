"""Pure-NumPy implementation of the training kernels.

This is the fallback backend (and the reference the compiled extension is
checked against). One kernel instance is bound to a fixed architecture and
coordinate batch; the trainer reuses it across epochs.
"""

from __future__ import annotations

import numpy as np

from ..errors import StructuralError, ValidationError
from .arch import KIND_FILM_SIREN, KIND_MLP, KIND_SIREN, InrArchitecture, parameter_count

NAME = "python"


def adam_update(params, grads, m, v, t, lr, beta1, beta2, eps):
    """In-place bias-corrected Adam step; ``t`` is the 1-based step index."""
    m *= beta1
    m += (1.0 - beta1) * grads
    v *= beta2
    v += (1.0 - beta2) * grads * grads
    m_hat = m / (1.0 - beta1**t)
    v_hat = v / (1.0 - beta2**t)
    params -= lr * m_hat / (np.sqrt(v_hat) + eps)


class Kernel:
    """Forward/backward/train-step for one architecture on a fixed batch."""

    def __init__(self, arch: InrArchitecture, coords: np.ndarray):
        coords = np.ascontiguousarray(coords, dtype=np.float64)
        if coords.ndim != 2 or coords.shape[1] != arch.in_dim:
            raise StructuralError(f"coords must be (N, {arch.in_dim}), got {coords.shape}")
        if coords.shape[0] == 0:
            raise ValidationError("empty coordinate batch")
        if not np.isfinite(coords).all():
            raise ValidationError("coords contain non-finite values")
        self.arch = arch
        self.coords = coords
        self.n_params = parameter_count(arch)
        self._offsets = self._build_offsets()

    def _build_offsets(self):
        dims = self.arch.trunk_dims
        offsets = []
        pos = 0
        for layer in range(len(dims) - 1):
            fan_in, fan_out = dims[layer], dims[layer + 1]
            offsets.append((pos, fan_out, fan_in))
            pos += fan_in * fan_out + fan_out
        self._trunk_end = pos
        return offsets

    def _views(self, vec: np.ndarray):
        """(W, b) views over a flat vector, trunk order, plus FiLM views."""
        trunk = []
        for pos, fan_out, fan_in in self._offsets:
            w = vec[pos : pos + fan_in * fan_out].reshape(fan_out, fan_in)
            b = vec[pos + fan_in * fan_out : pos + fan_in * fan_out + fan_out]
            trunk.append((w, b))
        if self.arch.kind != KIND_FILM_SIREN:
            return trunk, None
        arch = self.arch
        pos = self._trunk_end
        latent = vec[pos : pos + arch.latent_dim]
        pos += arch.latent_dim
        mh, ld, f = arch.mapping_hidden, arch.latent_dim, arch.film_out_dim
        w0 = vec[pos : pos + mh * ld].reshape(mh, ld)
        pos += mh * ld
        b0 = vec[pos : pos + mh]
        pos += mh
        w1 = vec[pos : pos + f * mh].reshape(f, mh)
        pos += f * mh
        b1 = vec[pos : pos + f]
        return trunk, (latent, w0, b0, w1, b1)

    def _film_scales(self, film):
        """Per-layer (gamma, beta) from the mapping network, plus caches."""
        latent, w0, b0, w1, b1 = film
        pre = w0 @ latent + b0
        hidden = np.maximum(pre, 0.0)
        out = w1 @ hidden + b1
        s = sum(self.arch.hidden)
        gamma_parts, beta_parts = [], []
        pos = 0
        for width in self.arch.hidden:
            gamma_parts.append(1.0 + out[pos : pos + width])
            beta_parts.append(out[s + pos : s + pos + width])
            pos += width
        return gamma_parts, beta_parts, (pre, hidden)

    # -- forward ------------------------------------------------------------

    def forward(self, params: np.ndarray) -> np.ndarray:
        out, _ = self._forward_cached(params)
        return out

    def _forward_cached(self, params):
        arch = self.arch
        trunk, film = self._views(params)
        gammas = betas = film_cache = None
        if film is not None:
            gammas, betas, film_cache = self._film_scales(film)

        h = self.coords
        cache = []  # per sine/relu layer: (input, pre, s) as needed by backward
        for layer, (w, b) in enumerate(trunk[:-1]):
            pre = h @ w.T + b
            if arch.kind == KIND_MLP:
                s = pre
                h_next = np.maximum(pre, 0.0)
            else:
                u = arch.omega0 * pre if layer == 0 else pre
                if arch.kind == KIND_FILM_SIREN:
                    s = u * gammas[layer] + betas[layer]
                else:
                    s = u
                h_next = np.sin(s)
            cache.append((h, pre, s))
            h = h_next
        w_out, b_out = trunk[-1]
        out = h @ w_out.T + b_out
        return out, (trunk, film, cache, h, gammas, film_cache)

    # -- loss / gradient ------------------------------------------------------

    def loss_and_grad(self, params: np.ndarray, targets: np.ndarray) -> tuple[float, np.ndarray]:
        targets = np.asarray(targets, dtype=np.float64)
        if targets.shape != (self.coords.shape[0], self.arch.out_dim):
            raise StructuralError(
                f"targets must be {(self.coords.shape[0], self.arch.out_dim)}, got {targets.shape}"
            )
        out, state = self._forward_cached(params)
        trunk, film, cache, h_last, gammas, film_cache = state
        arch = self.arch

        diff = out - targets
        loss = float(np.mean(diff * diff))
        grads = np.zeros_like(params)
        g_trunk, g_film = self._views(grads)

        d_out = (2.0 / diff.size) * diff
        w_out, _ = trunk[-1]
        gw, gb = g_trunk[-1]
        gw += d_out.T @ h_last
        gb += d_out.sum(axis=0)
        dh = d_out @ w_out

        d_gamma_parts = [None] * len(arch.hidden)
        d_beta_parts = [None] * len(arch.hidden)
        for layer in range(len(arch.hidden) - 1, -1, -1):
            h_in, pre, s = cache[layer]
            if arch.kind == KIND_MLP:
                d_pre = dh * (pre > 0.0)
            else:
                ds = dh * np.cos(s)
                if arch.kind == KIND_FILM_SIREN:
                    u = arch.omega0 * pre if layer == 0 else pre
                    d_beta_parts[layer] = ds.sum(axis=0)
                    d_gamma_parts[layer] = (ds * u).sum(axis=0)
                    du = ds * gammas[layer]
                else:
                    du = ds
                d_pre = arch.omega0 * du if layer == 0 else du
            w, _ = trunk[layer]
            gw, gb = g_trunk[layer]
            gw += d_pre.T @ h_in
            gb += d_pre.sum(axis=0)
            dh = d_pre @ w

        if arch.kind == KIND_FILM_SIREN:
            latent, w0, _, w1, _ = film
            g_latent, g_w0, g_b0, g_w1, g_b1 = g_film
            pre_m, hidden_m = film_cache
            d_map_out = np.concatenate([np.concatenate(d_gamma_parts),
                                        np.concatenate(d_beta_parts)])
            g_w1 += np.outer(d_map_out, hidden_m)
            g_b1 += d_map_out
            d_hidden = w1.T @ d_map_out
            d_pre_m = d_hidden * (pre_m > 0.0)
            g_w0 += np.outer(d_pre_m, latent)
            g_b0 += d_pre_m
            g_latent += w0.T @ d_pre_m

        return loss, grads

    # -- fused epoch ----------------------------------------------------------

    def train_step(self, params, targets, m, v, t, lr, beta1, beta2, eps) -> float:
        """One full-batch gradient step: returns the pre-update loss."""
        loss, grads = self.loss_and_grad(params, targets)
        if not np.isfinite(loss) or not np.isfinite(grads).all():
            return float("nan")
        adam_update(params, grads, m, v, t, lr, beta1, beta2, eps)
        return loss
