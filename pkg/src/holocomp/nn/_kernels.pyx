# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled training kernels.

Same math and flat parameter layout as ``numpy_backend`` (the reference
implementation); matrix products go through BLAS dgemm, everything else is
fused C loops over preallocated workspaces, so one training epoch performs
no Python-level allocation.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport isfinite, sqrt
from scipy.linalg.cython_blas cimport dgemm

cdef extern from "math.h" nogil:
    void sincos(double x, double* sin_out, double* cos_out)
    double nearbyint(double x)
    double fabs(double x)

# Cody-Waite split of pi/2 and Cephes minimax polynomials on [-pi/4, pi/4].
DEF PIO2_HI = 1.5707963267948966
DEF PIO2_LO = 6.123233995736766e-17
DEF INV_PIO2 = 0.6366197723675814
DEF HUGE_ARG = 1e6


cdef inline void _fast_sincos(double x, double* s_out, double* c_out) noexcept nogil:
    """sin and cos to ~1e-13 absolute error for |x| < 1e6; exact libm beyond."""
    cdef double k, r, z, sin_r, cos_r, ps, pc
    cdef long q
    if fabs(x) > HUGE_ARG:
        sincos(x, s_out, c_out)
        return
    k = nearbyint(x * INV_PIO2)
    q = (<long>k) & 3
    r = x - k * PIO2_HI
    r -= k * PIO2_LO
    z = r * r
    ps = 1.58962301576546568060e-10
    ps = ps * z - 2.50507477628578072866e-8
    ps = ps * z + 2.75573136213857245213e-6
    ps = ps * z - 1.98412698295895385996e-4
    ps = ps * z + 8.33333333332211858878e-3
    ps = ps * z - 1.66666666666666307295e-1
    sin_r = r + r * z * ps
    pc = -1.13585365213876817300e-11
    pc = pc * z + 2.08757008419747316778e-9
    pc = pc * z - 2.75573141792967388112e-7
    pc = pc * z + 2.48015872888517179954e-5
    pc = pc * z - 1.38888888888730564116e-3
    pc = pc * z + 4.16666666666665929218e-2
    cos_r = 1.0 - 0.5 * z + z * z * pc
    # branchless quadrant selection: odd quadrants swap sin/cos, the sign
    # follows the quadrant parity
    cdef bint swap = q & 1
    cdef double s_val = cos_r if swap else sin_r
    cdef double c_val = sin_r if swap else cos_r
    s_out[0] = s_val * <double>(1 - (q & 2))
    c_out[0] = c_val * <double>(1 - ((q + 1) & 2))

from ..errors import StructuralError, ValidationError
from .arch import KIND_FILM_SIREN, KIND_MLP, KIND_SIREN, parameter_count

cnp.import_array()

NAME = "ext"

DEF KMLP = 0
DEF KSIREN = 1
DEF KFILM = 2


cdef void _gemm_nt(double* x, double* w, double* out,
                   int n, int din, int dout) noexcept nogil:
    """out(n,dout) = x(n,din) @ w(dout,din)^T, row-major buffers."""
    cdef int m_ = dout, n_ = n, k_ = din
    cdef double one = 1.0, zero = 0.0
    dgemm("T", "N", &m_, &n_, &k_, &one, w, &k_, x, &k_, &zero, out, &m_)


cdef void _gemm_tn(double* dz, double* x, double* gw,
                   int n, int dout, int din) noexcept nogil:
    """gw(dout,din) = dz(n,dout)^T @ x(n,din), row-major buffers."""
    cdef int m_ = din, n_ = dout, k_ = n
    cdef double one = 1.0, zero = 0.0
    dgemm("N", "T", &m_, &n_, &k_, &one, x, &m_, dz, &n_, &zero, gw, &m_)


cdef void _gemm_nn(double* dz, double* w, double* dx,
                   int n, int dout, int din) noexcept nogil:
    """dx(n,din) = dz(n,dout) @ w(dout,din), row-major buffers."""
    cdef int m_ = din, n_ = n, k_ = dout
    cdef double one = 1.0, zero = 0.0
    dgemm("N", "N", &m_, &n_, &k_, &one, w, &m_, dz, &k_, &zero, dx, &m_)


cdef class Kernel:
    """Forward/backward/train-step bound to one architecture and batch."""

    cdef int kind
    cdef int n            # batch size
    cdef int n_layers     # number of sine/relu layers
    cdef int n_params
    cdef int latent_dim, mh, fdim, hsum
    cdef double omega0
    cdef long[::1] dims
    cdef long[::1] w_off, b_off
    cdef long[::1] hid_off
    cdef long lat_off, mw0_off, mb0_off, mw1_off, mb1_off
    cdef double[::1] coords
    cdef double[::1] ws
    cdef long[::1] pre_off, c_off, h_off
    cdef long out_off, dout_off, dh1_off, dh2_off, dpre_off
    cdef long mpre_off, mhid_off, mout_off, dmout_off
    cdef object arch
    cdef object _grad_buf

    def __init__(self, arch, coords):
        coords = np.ascontiguousarray(coords, dtype=np.float64)
        if coords.ndim != 2 or coords.shape[1] != arch.in_dim:
            raise StructuralError(f"coords must be (N, {arch.in_dim}), got {coords.shape}")
        if coords.shape[0] == 0:
            raise ValidationError("empty coordinate batch")
        if not np.isfinite(coords).all():
            raise ValidationError("coords contain non-finite values")

        self.arch = arch
        self.kind = {KIND_MLP: KMLP, KIND_SIREN: KSIREN, KIND_FILM_SIREN: KFILM}[arch.kind]
        self.n = coords.shape[0]
        self.n_layers = len(arch.hidden)
        self.n_params = parameter_count(arch)
        self.omega0 = arch.omega0
        self.latent_dim = arch.latent_dim
        self.mh = arch.mapping_hidden
        self.hsum = sum(arch.hidden)
        self.fdim = 2 * self.hsum
        self.coords = coords.ravel()

        dims = np.array(arch.trunk_dims, dtype=np.int64)
        self.dims = dims
        w_off = np.zeros(len(dims) - 1, dtype=np.int64)
        b_off = np.zeros(len(dims) - 1, dtype=np.int64)
        pos = 0
        for l in range(len(dims) - 1):
            w_off[l] = pos
            pos += dims[l] * dims[l + 1]
            b_off[l] = pos
            pos += dims[l + 1]
        self.w_off, self.b_off = w_off, b_off
        if self.kind == KFILM:
            self.lat_off = pos
            pos += self.latent_dim
            self.mw0_off = pos
            pos += self.latent_dim * self.mh
            self.mb0_off = pos
            pos += self.mh
            self.mw1_off = pos
            pos += self.mh * self.fdim
            self.mb1_off = pos
            pos += self.fdim
        assert pos == self.n_params

        hid_off = np.zeros(self.n_layers + 1, dtype=np.int64)
        for l in range(self.n_layers):
            hid_off[l + 1] = hid_off[l] + arch.hidden[l]
        self.hid_off = hid_off

        # one flat workspace; per-buffer offsets below
        n = self.n
        maxw = int(max(arch.hidden))
        pre_off = np.zeros(self.n_layers, dtype=np.int64)
        c_off = np.zeros(self.n_layers, dtype=np.int64)
        h_off = np.zeros(self.n_layers, dtype=np.int64)
        pos = 0
        for l in range(self.n_layers):
            width = int(arch.hidden[l])
            pre_off[l] = pos; pos += n * width
            c_off[l] = pos; pos += n * width
            h_off[l] = pos; pos += n * width
        self.pre_off, self.c_off, self.h_off = pre_off, c_off, h_off
        self.out_off = pos; pos += n * arch.out_dim
        self.dout_off = pos; pos += n * arch.out_dim
        self.dh1_off = pos; pos += n * maxw
        self.dh2_off = pos; pos += n * maxw
        self.dpre_off = pos; pos += n * maxw
        self.mpre_off = pos; pos += max(1, self.mh)
        self.mhid_off = pos; pos += max(1, self.mh)
        self.mout_off = pos; pos += max(1, self.fdim)
        self.dmout_off = pos; pos += max(1, self.fdim)
        self.ws = np.zeros(pos, dtype=np.float64)
        self._grad_buf = np.zeros(self.n_params, dtype=np.float64)

    # -- internals ----------------------------------------------------------

    cdef void _mapping_forward(self, double* p) noexcept nogil:
        cdef double* latent = p + self.lat_off
        cdef double* w0 = p + self.mw0_off
        cdef double* b0 = p + self.mb0_off
        cdef double* w1 = p + self.mw1_off
        cdef double* b1 = p + self.mb1_off
        cdef double* mpre = &self.ws[self.mpre_off]
        cdef double* mhid = &self.ws[self.mhid_off]
        cdef double* mout = &self.ws[self.mout_off]
        cdef int i, j
        cdef double acc
        for i in range(self.mh):
            acc = b0[i]
            for j in range(self.latent_dim):
                acc += w0[i * self.latent_dim + j] * latent[j]
            mpre[i] = acc
            mhid[i] = acc if acc > 0.0 else 0.0
        for i in range(self.fdim):
            acc = b1[i]
            for j in range(self.mh):
                acc += w1[i * self.mh + j] * mhid[j]
            mout[i] = acc

    cdef double _forward(self, double* p) noexcept nogil:
        """Run the trunk; activations and cos caches stay in the workspace."""
        cdef int n = self.n, l, i, j, width, din
        cdef double* h_prev
        cdef double* pre
        cdef double* cb
        cdef double* h
        cdef double* b
        cdef double* mout = &self.ws[self.mout_off]
        cdef double scale, g, be, sv
        if self.kind == KFILM:
            self._mapping_forward(p)
        h_prev = &self.coords[0]
        din = <int>self.dims[0]
        for l in range(self.n_layers):
            width = <int>self.dims[l + 1]
            pre = &self.ws[self.pre_off[l]]
            cb = &self.ws[self.c_off[l]]
            h = &self.ws[self.h_off[l]]
            _gemm_nt(h_prev, p + self.w_off[l], pre, n, din, width)
            b = p + self.b_off[l]
            scale = self.omega0 if l == 0 else 1.0
            if self.kind == KMLP:
                for i in range(n):
                    for j in range(width):
                        pre[i * width + j] += b[j]
                        h[i * width + j] = pre[i * width + j] if pre[i * width + j] > 0.0 else 0.0
            elif self.kind == KSIREN:
                for i in range(n):
                    for j in range(width):
                        pre[i * width + j] += b[j]
                        _fast_sincos(scale * pre[i * width + j],
                               &h[i * width + j], &cb[i * width + j])
            else:
                for i in range(n):
                    for j in range(width):
                        pre[i * width + j] += b[j]
                        g = 1.0 + mout[self.hid_off[l] + j]
                        be = mout[self.hsum + self.hid_off[l] + j]
                        sv = g * scale * pre[i * width + j] + be
                        _fast_sincos(sv, &h[i * width + j], &cb[i * width + j])
            h_prev = h
            din = width
        # output layer
        cdef double* out = &self.ws[self.out_off]
        cdef int dout_dim = <int>self.dims[self.n_layers + 1]
        _gemm_nt(h_prev, p + self.w_off[self.n_layers], out, n, din, dout_dim)
        b = p + self.b_off[self.n_layers]
        for i in range(n):
            for j in range(dout_dim):
                out[i * dout_dim + j] += b[j]
        return 0.0

    cdef double _backward(self, double* p, double* targets, double* grad) noexcept nogil:
        """MSE loss + gradient; assumes _forward already ran."""
        cdef int n = self.n, odim = <int>self.dims[self.n_layers + 1]
        cdef double* out = &self.ws[self.out_off]
        cdef double* dout = &self.ws[self.dout_off]
        cdef double* mout = &self.ws[self.mout_off]
        cdef double* dmout = &self.ws[self.dmout_off]
        cdef int i, j, l, width, din
        cdef double diff, loss = 0.0, coeff
        cdef double scale, u, dsv

        for i in range(n * odim):
            diff = out[i] - targets[i]
            loss += diff * diff
        loss /= n * odim
        coeff = 2.0 / (n * odim)
        for i in range(n * odim):
            dout[i] = coeff * (out[i] - targets[i])

        for i in range(self.n_params):
            grad[i] = 0.0
        for i in range(max(1, self.fdim)):
            dmout[i] = 0.0

        # output layer
        cdef double* h_last = &self.ws[self.h_off[self.n_layers - 1]]
        cdef int d_last = <int>self.dims[self.n_layers]
        _gemm_tn(dout, h_last, grad + self.w_off[self.n_layers], n, odim, d_last)
        for i in range(n):
            for j in range(odim):
                grad[self.b_off[self.n_layers] + j] += dout[i * odim + j]
        cdef double* dh = &self.ws[self.dh1_off]
        cdef double* dh_next = &self.ws[self.dh2_off]
        cdef double* dpre = &self.ws[self.dpre_off]
        cdef double* tmp
        _gemm_nn(dout, p + self.w_off[self.n_layers], dh, n, odim, d_last)

        cdef double* pre
        cdef double* cb
        cdef double* h_in
        for l in range(self.n_layers - 1, -1, -1):
            width = <int>self.dims[l + 1]
            din = <int>self.dims[l]
            pre = &self.ws[self.pre_off[l]]
            cb = &self.ws[self.c_off[l]]
            scale = self.omega0 if l == 0 else 1.0
            if self.kind == KMLP:
                for i in range(n):
                    for j in range(width):
                        dpre[i * width + j] = dh[i * width + j] if pre[i * width + j] > 0.0 else 0.0
            elif self.kind == KSIREN:
                for i in range(n):
                    for j in range(width):
                        dpre[i * width + j] = scale * dh[i * width + j] * cb[i * width + j]
            else:
                for i in range(n):
                    for j in range(width):
                        dsv = dh[i * width + j] * cb[i * width + j]
                        u = scale * pre[i * width + j]
                        dmout[self.hsum + self.hid_off[l] + j] += dsv
                        dmout[self.hid_off[l] + j] += dsv * u
                        dpre[i * width + j] = dsv * (1.0 + mout[self.hid_off[l] + j]) * scale
            h_in = &self.coords[0] if l == 0 else &self.ws[self.h_off[l - 1]]
            _gemm_tn(dpre, h_in, grad + self.w_off[l], n, width, din)
            for i in range(n):
                for j in range(width):
                    grad[self.b_off[l] + j] += dpre[i * width + j]
            if l > 0:
                _gemm_nn(dpre, p + self.w_off[l], dh_next, n, width, din)
                tmp = dh
                dh = dh_next
                dh_next = tmp

        if self.kind == KFILM:
            self._mapping_backward(p, grad)
        return loss

    cdef void _mapping_backward(self, double* p, double* grad) noexcept nogil:
        cdef double* latent = p + self.lat_off
        cdef double* w0 = p + self.mw0_off
        cdef double* w1 = p + self.mw1_off
        cdef double* mpre = &self.ws[self.mpre_off]
        cdef double* mhid = &self.ws[self.mhid_off]
        cdef double* dmout = &self.ws[self.dmout_off]
        cdef int i, j
        cdef double acc, dp
        # output layer of the mapping network
        for i in range(self.fdim):
            grad[self.mb1_off + i] += dmout[i]
            for j in range(self.mh):
                grad[self.mw1_off + i * self.mh + j] += dmout[i] * mhid[j]
        # hidden layer and latent
        for j in range(self.mh):
            acc = 0.0
            for i in range(self.fdim):
                acc += w1[i * self.mh + j] * dmout[i]
            dp = acc if mpre[j] > 0.0 else 0.0
            grad[self.mb0_off + j] += dp
            for i in range(self.latent_dim):
                grad[self.mw0_off + j * self.latent_dim + i] += dp * latent[i]
                grad[self.lat_off + i] += dp * w0[j * self.latent_dim + i]

    # -- public interface (mirrors numpy_backend.Kernel) ----------------------

    def forward(self, params):
        cdef double[::1] p = self._check_params(params)
        self._forward(&p[0])
        out = np.asarray(self.ws[self.out_off : self.out_off + self.n * self.arch.out_dim])
        return out.reshape(self.n, self.arch.out_dim).copy()

    def loss_and_grad(self, params, targets):
        cdef double[::1] p = self._check_params(params)
        cdef double[::1] t = self._check_targets(targets)
        grads = np.zeros(self.n_params, dtype=np.float64)
        cdef double[::1] g = grads
        cdef double loss
        with nogil:
            self._forward(&p[0])
            loss = self._backward(&p[0], &t[0], &g[0])
        return float(loss), grads

    def train_step(self, params, targets, m, v, t, lr, beta1, beta2, eps):
        """One fused epoch: forward, backward, Adam. Returns pre-update loss;
        on a non-finite loss/gradient returns NaN without touching params."""
        cdef double[::1] p = self._check_params(params)
        cdef double[::1] tg = self._check_targets(targets)
        cdef double[::1] mv = m
        cdef double[::1] vv = v
        cdef double[::1] g = self._grad_buf
        cdef double loss, lr_ = lr, b1 = beta1, b2 = beta2, eps_ = eps
        cdef long step = t
        cdef int i, ok = 1
        cdef double mhat, vhat, c1, c2
        if mv.shape[0] != self.n_params or vv.shape[0] != self.n_params:
            raise StructuralError("optimizer state length mismatch")
        with nogil:
            self._forward(&p[0])
            loss = self._backward(&p[0], &tg[0], &g[0])
            if not isfinite(loss):
                ok = 0
            else:
                for i in range(self.n_params):
                    if not isfinite(g[i]):
                        ok = 0
                        break
            if ok:
                c1 = 1.0 - b1 ** step
                c2 = 1.0 - b2 ** step
                for i in range(self.n_params):
                    mv[i] = b1 * mv[i] + (1.0 - b1) * g[i]
                    vv[i] = b2 * vv[i] + (1.0 - b2) * g[i] * g[i]
                    mhat = mv[i] / c1
                    vhat = vv[i] / c2
                    p[i] -= lr_ * mhat / (sqrt(vhat) + eps_)
        return float(loss) if ok else float("nan")

    def _check_params(self, params):
        arr = np.ascontiguousarray(params, dtype=np.float64)
        if arr.shape != (self.n_params,):
            raise StructuralError(f"params must be ({self.n_params},), got {arr.shape}")
        if arr is not params and isinstance(params, np.ndarray):
            # a copy would silently drop in-place updates
            raise StructuralError("params must be a C-contiguous float64 vector")
        return arr

    def _check_targets(self, targets):
        arr = np.ascontiguousarray(targets, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] != self.n or arr.shape[1] != self.arch.out_dim:
            raise StructuralError(
                f"targets must be ({self.n}, {self.arch.out_dim}), got {arr.shape}"
            )
        return arr.ravel()
