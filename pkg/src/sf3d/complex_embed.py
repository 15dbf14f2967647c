"""Input-embedding variants for complex multi-channel input, in plain numpy.

Three ways of turning a ``[2 M^2, F, T]`` complex tensor into a real
``[H, T / 4]`` embedding:

``naive``
    Real and imaginary parts are concatenated along channels and treated as
    one ``[4 M^2, F, T]`` real tensor.
``separate``
    Real and imaginary parts go through the same real conv stack
    independently; the two projected results are fused as ``R^2 + I^2``.
``cross_product``
    Complex convolution, ``[F(Wr*R - Wi*I), F(Wi*R + Wr*I)]`` per layer, then a
    complex projection and the same ``R^2 + I^2`` fusion.

After the conv stack the frequency axis is flattened into channels and
projected to ``H`` per frame. Every variant has an analytic backward pass.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .mapio import read_tensors, write_tensors

Variant = Literal["naive", "separate", "cross_product"]
VARIANTS = ("naive", "separate", "cross_product")


class NonFiniteGradientError(FloatingPointError):
    pass


# ---------------------------------------------------------------- conv core


def _out_size(n: int, k: int, s: int, p: int) -> int:
    return (n + 2 * p - k) // s + 1


def _patches(x: np.ndarray, k: tuple[int, int], s: tuple[int, int], p: tuple[int, int]) -> np.ndarray:
    """im2col view of ``x`` [C, H, W] as [C, Ho, Wo, kH, kW]."""
    xp = np.pad(x, ((0, 0), (p[0], p[0]), (p[1], p[1])))
    win = np.lib.stride_tricks.sliding_window_view(xp, k, axis=(1, 2))
    return win[:, :: s[0], :: s[1]]


def conv2d(x: np.ndarray, w: np.ndarray, stride=(1, 1), padding=(0, 0)) -> np.ndarray:
    """Cross-correlation of ``x`` [C_in, H, W] with ``w`` [C_out, C_in, kH, kW]."""
    if x.shape[0] != w.shape[1]:
        raise ValueError(f"input has {x.shape[0]} channels, kernel expects {w.shape[1]}")
    kh, kw = w.shape[2:]
    if x.shape[1] + 2 * padding[0] < kh or x.shape[2] + 2 * padding[1] < kw:
        raise ValueError("input is smaller than the kernel")
    cols = _patches(x, (kh, kw), stride, padding)
    return np.einsum("ocij,chwij->ohw", w, cols, optimize=True)


def conv2d_grad_weight(x: np.ndarray, grad_out: np.ndarray, kernel, stride, padding) -> np.ndarray:
    cols = _patches(x, kernel, stride, padding)
    return np.einsum("ohw,chwij->ocij", grad_out, cols, optimize=True)


def conv2d_grad_input(w: np.ndarray, grad_out: np.ndarray, x_shape, stride, padding) -> np.ndarray:
    c, h, wd = x_shape
    kh, kw = w.shape[2:]
    ho, wo = grad_out.shape[1:]
    dcols = np.einsum("ocij,ohw->cijhw", w, grad_out, optimize=True)
    dxp = np.zeros((c, h + 2 * padding[0], wd + 2 * padding[1]))
    sh, sw = stride
    for i in range(kh):
        for j in range(kw):
            dxp[:, i : i + sh * ho : sh, j : j + sw * wo : sw] += dcols[:, i, j]
    return dxp[:, padding[0] : padding[0] + h, padding[1] : padding[1] + wd]


def _activate(z: np.ndarray, activation: str) -> np.ndarray:
    if activation == "relu":
        return np.maximum(z, 0.0)
    if activation == "identity":
        return z
    raise ValueError(f"unknown activation {activation!r}")


def _activation_grad(z: np.ndarray, activation: str) -> np.ndarray:
    # relu subgradient at 0 is 0
    return (z > 0).astype(z.dtype) if activation == "relu" else np.ones_like(z)


@dataclass
class ComplexConvLayer:
    w_r: np.ndarray
    w_i: np.ndarray
    stride: tuple[int, int] = (1, 1)
    padding: tuple[int, int] = (0, 0)
    activation: str = "identity"

    def __post_init__(self):
        if self.w_r.shape != self.w_i.shape or self.w_r.ndim != 4:
            raise ValueError("w_r and w_i must share a [C_out, C_in, kH, kW] shape")
        if min(self.stride) < 1:
            raise ValueError("stride must be >= 1")
        if not (np.all(np.isfinite(self.w_r)) and np.all(np.isfinite(self.w_i))):
            raise ValueError("weights must be finite")


def complex_conv2d_forward(layer: ComplexConvLayer, R: np.ndarray, I: np.ndarray):
    """``(F(Wr*R - Wi*I), F(Wi*R + Wr*I))`` for one layer."""
    if R.shape != I.shape:
        raise ValueError(f"real part {R.shape} and imaginary part {I.shape} differ")
    s, p = layer.stride, layer.padding
    zr = conv2d(R, layer.w_r, s, p) - conv2d(I, layer.w_i, s, p)
    zi = conv2d(R, layer.w_i, s, p) + conv2d(I, layer.w_r, s, p)
    return _activate(zr, layer.activation), _activate(zi, layer.activation)


# ---------------------------------------------------------------- embedding


@dataclass(frozen=True)
class EmbedConfig:
    """Embedding hyper-parameters.

    ``time_strides`` defaults to ``(4,)`` for one layer and ``(2, 2)`` for
    two; their product must be 4. Padding is ``kernel // 2`` so each layer
    maps a length ``n`` axis to ``ceil(n / stride)``.
    """

    variant: Variant = "cross_product"
    channels: tuple[int, ...] = (32, 32)
    hidden_dim: int = 8
    kernel: tuple[int, int] = (3, 3)
    freq_stride: int = 2
    time_strides: tuple[int, ...] | None = None
    activation: str = "relu"
    shared_branches: bool = True

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.hidden_dim <= 0:
            raise ValueError("hidden_dim must be positive")
        if not self.channels:
            raise ValueError("need at least one conv layer")
        if self.time_strides is None:
            defaults = {1: (4,), 2: (2, 2)}
            if len(self.channels) not in defaults:
                raise ValueError("give time_strides explicitly for more than two layers")
            object.__setattr__(self, "time_strides", defaults[len(self.channels)])
        if len(self.time_strides) != len(self.channels):
            raise ValueError("one time stride per layer")
        if int(np.prod(self.time_strides)) != 4:
            raise ValueError("time strides must multiply to 4")
        if self.activation not in ("relu", "identity"):
            raise ValueError(f"unknown activation {self.activation!r}")

    @property
    def n_layers(self) -> int:
        return len(self.channels)

    @property
    def padding(self) -> tuple[int, int]:
        return (self.kernel[0] // 2, self.kernel[1] // 2)

    def strides(self, layer: int) -> tuple[int, int]:
        return (self.freq_stride, self.time_strides[layer])


def _as_complex(x) -> np.ndarray:
    data = getattr(x, "data", x)
    data = np.asarray(data)
    if data.ndim != 3:
        raise ValueError(f"expected [2 M^2, F, T] input, got shape {data.shape}")
    return data.astype(np.complex128)


def _n_mics_from_channels(n_channels: int) -> int:
    m = int(round(np.sqrt(n_channels / 2)))
    if 2 * m * m != n_channels:
        raise ValueError(f"{n_channels} channels is not 2 M^2 for any M")
    return m


class InputEmbedding:
    """One of the three embedding variants with its parameters.

    Parameters are created for a fixed microphone count and bin count and
    drawn uniformly in ``+-1/sqrt(fan_in)`` from ``seed``.
    """

    def __init__(self, cfg: EmbedConfig, n_mics: int, n_bins: int, seed: int = 0):
        self.cfg = cfg
        self.n_mics = n_mics
        self.n_bins = n_bins
        self.params: dict[str, np.ndarray] = {}
        self._cache = None

        rng = np.random.default_rng(seed)
        c_in = 2 * n_mics**2 * (2 if cfg.variant == "naive" else 1)
        kh, kw = cfg.kernel
        f = n_bins
        for layer, c_out in enumerate(cfg.channels):
            bound = 1.0 / np.sqrt(c_in * kh * kw)
            for name in self._conv_names(layer):
                self.params[name] = rng.uniform(-bound, bound, (c_out, c_in, kh, kw))
            c_in = c_out
            f = _out_size(f, kh, cfg.freq_stride, cfg.padding[0])
        self.out_bins = f
        feat = c_in * f
        bound = 1.0 / np.sqrt(feat)
        for name in self._proj_names():
            self.params[name] = rng.uniform(-bound, bound, (cfg.hidden_dim, feat))

    # -- parameter layout

    def _conv_names(self, layer: int) -> list[str]:
        v = self.cfg.variant
        if v == "cross_product":
            return [f"conv{layer}.w_r", f"conv{layer}.w_i"]
        if v == "separate" and not self.cfg.shared_branches:
            return [f"conv{layer}.w_re", f"conv{layer}.w_im"]
        return [f"conv{layer}.w"]

    def _proj_names(self) -> list[str]:
        v = self.cfg.variant
        if v == "cross_product":
            return ["proj.w_r", "proj.w_i"]
        if v == "separate" and not self.cfg.shared_branches:
            return ["proj.w_re", "proj.w_im"]
        return ["proj.w"]

    def conv_param_count(self) -> int:
        return sum(v.size for k, v in self.params.items() if k.startswith("conv"))

    def n_params(self) -> int:
        return sum(v.size for v in self.params.values())

    def save(self, path) -> None:
        write_tensors(path, self.params)

    def load(self, path) -> None:
        loaded = read_tensors(path)
        if set(loaded) != set(self.params):
            raise ValueError(f"tensor names {sorted(loaded)} do not match {sorted(self.params)}")
        for k, v in loaded.items():
            if v.shape != self.params[k].shape:
                raise ValueError(f"{k}: shape {v.shape} != {self.params[k].shape}")
            self.params[k] = v

    # -- forward

    def _check_input(self, x: np.ndarray):
        m2 = 2 * self.n_mics**2
        if x.shape[0] != m2:
            raise ValueError(f"expected {m2} input channels, got {x.shape[0]}")
        if x.shape[1] != self.n_bins:
            raise ValueError(f"expected {self.n_bins} bins, got {x.shape[1]}")
        if x.shape[2] % 4:
            raise ValueError(f"frame count {x.shape[2]} is not divisible by 4")

    def _real_stack(self, x: np.ndarray, suffix: str = ""):
        cfg = self.cfg
        acts, pres = [x], []
        for layer in range(cfg.n_layers):
            w = self.params[f"conv{layer}.w{suffix}"]
            z = conv2d(acts[-1], w, cfg.strides(layer), cfg.padding)
            pres.append(z)
            acts.append(_activate(z, cfg.activation))
        return acts, pres

    def _complex_stack(self, R: np.ndarray, I: np.ndarray):
        cfg = self.cfg
        acts, pres = [(R, I)], []
        for layer in range(cfg.n_layers):
            wr, wi = self.params[f"conv{layer}.w_r"], self.params[f"conv{layer}.w_i"]
            r, i = acts[-1]
            s, p = cfg.strides(layer), cfg.padding
            zr = conv2d(r, wr, s, p) - conv2d(i, wi, s, p)
            zi = conv2d(r, wi, s, p) + conv2d(i, wr, s, p)
            pres.append((zr, zi))
            acts.append((_activate(zr, cfg.activation), _activate(zi, cfg.activation)))
        return acts, pres

    def conv_stack(self, x):
        """Conv-stack output before projection and fusion.

        Returns a real array for ``naive`` and an ``(R, I)`` tuple otherwise.
        """
        z = _as_complex(x)
        self._check_input(z)
        v = self.cfg.variant
        if v == "naive":
            return self._real_stack(np.concatenate([z.real, z.imag]))[0][-1]
        if v == "separate":
            sr, si = ("", "") if self.cfg.shared_branches else ("_re", "_im")
            return self._real_stack(z.real, sr)[0][-1], self._real_stack(z.imag, si)[0][-1]
        return self._complex_stack(z.real, z.imag)[0][-1]

    @staticmethod
    def _flatten(a: np.ndarray) -> np.ndarray:
        return a.reshape(a.shape[0] * a.shape[1], a.shape[2])

    def forward(self, x) -> np.ndarray:
        z = _as_complex(x)
        self._check_input(z)
        v = self.cfg.variant
        P = self.params
        if v == "naive":
            acts, pres = self._real_stack(np.concatenate([z.real, z.imag]))
            feat = self._flatten(acts[-1])
            out = P["proj.w"] @ feat
            self._cache = (acts, pres, feat)
            return out
        if v == "separate":
            sr, si = ("", "") if self.cfg.shared_branches else ("_re", "_im")
            pr_name = "proj.w" if self.cfg.shared_branches else "proj.w_re"
            pi_name = "proj.w" if self.cfg.shared_branches else "proj.w_im"
            acts_r, pres_r = self._real_stack(z.real, sr)
            acts_i, pres_i = self._real_stack(z.imag, si)
            fr, fi = self._flatten(acts_r[-1]), self._flatten(acts_i[-1])
            hr, hi = P[pr_name] @ fr, P[pi_name] @ fi
            self._cache = (acts_r, pres_r, acts_i, pres_i, fr, fi, hr, hi)
            return hr**2 + hi**2
        acts, pres = self._complex_stack(z.real, z.imag)
        fr, fi = self._flatten(acts[-1][0]), self._flatten(acts[-1][1])
        pr, pi = P["proj.w_r"], P["proj.w_i"]
        hr = pr @ fr - pi @ fi
        hi = pi @ fr + pr @ fi
        self._cache = (acts, pres, fr, fi, hr, hi)
        return hr**2 + hi**2

    __call__ = forward

    # -- backward

    def _real_stack_backward(self, acts, pres, g_last, suffix, grads):
        cfg = self.cfg
        g = g_last
        for layer in reversed(range(cfg.n_layers)):
            g = g * _activation_grad(pres[layer], cfg.activation)
            w = self.params[f"conv{layer}.w{suffix}"]
            s, p = cfg.strides(layer), cfg.padding
            name = f"conv{layer}.w{suffix}"
            grads[name] = grads.get(name, 0) + conv2d_grad_weight(acts[layer], g, cfg.kernel, s, p)
            if layer:
                g = conv2d_grad_input(w, g, acts[layer].shape, s, p)

    def _complex_stack_backward(self, acts, pres, gr, gi, grads):
        cfg = self.cfg
        for layer in reversed(range(cfg.n_layers)):
            zr, zi = pres[layer]
            gr = gr * _activation_grad(zr, cfg.activation)
            gi = gi * _activation_grad(zi, cfg.activation)
            r, i = acts[layer]
            s, p, k = cfg.strides(layer), cfg.padding, cfg.kernel
            gw = lambda x, g: conv2d_grad_weight(x, g, k, s, p)  # noqa: E731
            grads[f"conv{layer}.w_r"] = gw(r, gr) + gw(i, gi)
            grads[f"conv{layer}.w_i"] = gw(r, gi) - gw(i, gr)
            if layer:
                wr, wi = self.params[f"conv{layer}.w_r"], self.params[f"conv{layer}.w_i"]
                gx = lambda w, g: conv2d_grad_input(w, g, r.shape, s, p)  # noqa: E731
                gr, gi = gx(wr, gr) + gx(wi, gi), gx(wr, gi) - gx(wi, gr)

    def backward(self, grad_out: np.ndarray) -> dict[str, np.ndarray]:
        """Gradients of ``sum(grad_out * forward(x))`` for the last ``forward`` call."""
        if self._cache is None:
            raise RuntimeError("call forward before backward")
        v = self.cfg.variant
        P = self.params
        grads: dict[str, np.ndarray] = {}
        if v == "naive":
            acts, pres, feat = self._cache
            grads["proj.w"] = grad_out @ feat.T
            g = (P["proj.w"].T @ grad_out).reshape(acts[-1].shape)
            self._real_stack_backward(acts, pres, g, "", grads)
        elif v == "separate":
            acts_r, pres_r, acts_i, pres_i, fr, fi, hr, hi = self._cache
            ghr, ghi = 2 * hr * grad_out, 2 * hi * grad_out
            if self.cfg.shared_branches:
                grads["proj.w"] = ghr @ fr.T + ghi @ fi.T
                pr = pi = P["proj.w"]
                sr = si = ""
            else:
                grads["proj.w_re"] = ghr @ fr.T
                grads["proj.w_im"] = ghi @ fi.T
                pr, pi = P["proj.w_re"], P["proj.w_im"]
                sr, si = "_re", "_im"
            self._real_stack_backward(acts_r, pres_r, (pr.T @ ghr).reshape(acts_r[-1].shape), sr, grads)
            self._real_stack_backward(acts_i, pres_i, (pi.T @ ghi).reshape(acts_i[-1].shape), si, grads)
        else:
            acts, pres, fr, fi, hr, hi = self._cache
            ghr, ghi = 2 * hr * grad_out, 2 * hi * grad_out
            pr, pi = P["proj.w_r"], P["proj.w_i"]
            grads["proj.w_r"] = ghr @ fr.T + ghi @ fi.T
            grads["proj.w_i"] = ghi @ fr.T - ghr @ fi.T
            shape = acts[-1][0].shape
            gfr = (pr.T @ ghr + pi.T @ ghi).reshape(shape)
            gfi = (pr.T @ ghi - pi.T @ ghr).reshape(shape)
            self._complex_stack_backward(acts, pres, gfr, gfi, grads)
        for name, g in grads.items():
            if not np.all(np.isfinite(g)):
                raise NonFiniteGradientError(f"non-finite gradient for {name}")
        return grads

    def activation_pattern(self) -> np.ndarray:
        """Sign pattern of every pre-activation in the last forward pass."""
        v = self.cfg.variant
        if v == "naive":
            pres = self._cache[1]
            flat = [p for p in pres]
        elif v == "separate":
            flat = list(self._cache[1]) + list(self._cache[3])
        else:
            flat = [a for pair in self._cache[1] for a in pair]
        return np.concatenate([(p > 0).ravel() for p in flat])


def embed_forward(cfg: EmbedConfig, x, seed: int = 0, model: InputEmbedding | None = None) -> np.ndarray:
    """Embed ``x`` ([2 M^2, F, T] complex) to ``[H, T / 4]``.

    Builds a freshly seeded model unless one is passed in.
    """
    z = _as_complex(x)
    if model is None:
        model = InputEmbedding(cfg, _n_mics_from_channels(z.shape[0]), z.shape[1], seed)
    return model.forward(z)


@dataclass
class GradCheckResult:
    """Outcome of a finite-difference gradient check.

    ``max_rel_error`` is taken over the probed entries whose +-eps step does
    not flip any ReLU; ``n_kinks`` counts the probes skipped for that reason.
    """

    max_rel_error: float
    n_checked: int
    n_kinks: int
    per_tensor: dict[str, float] = field(default_factory=dict)


def grad_check(
    cfg: EmbedConfig,
    x,
    seed: int = 0,
    eps: float = 1e-5,
    n_probe: int | None = 32,
    model: InputEmbedding | None = None,
) -> GradCheckResult:
    """Compare analytic gradients with central finite differences.

    The scalar loss is ``sum(G * forward(x))`` with ``G`` drawn from ``seed``.
    ``n_probe`` entries per parameter tensor are checked (all when ``None``).
    The relative error of an entry is ``|a - n| / max(|a|, |n|, floor)`` with
    ``floor = 1e-7 * max|a|`` over the tensor, so entries that are exactly
    zero analytically are compared on the tensor's scale.
    """
    z = _as_complex(x)
    if model is None:
        model = InputEmbedding(cfg, _n_mics_from_channels(z.shape[0]), z.shape[1], seed)
    rng = np.random.default_rng(seed + 1_000_003)
    out = model.forward(z)
    weights = rng.standard_normal(out.shape)
    grads = model.backward(weights)

    def loss() -> tuple[float, np.ndarray | None]:
        val = float(np.sum(weights * model.forward(z)))
        pattern = model.activation_pattern() if cfg.activation == "relu" else None
        return val, pattern

    worst, checked, kinks = 0.0, 0, 0
    per_tensor = {}
    for name, param in model.params.items():
        flat = param.reshape(-1)
        g = grads[name].reshape(-1)
        idx = np.arange(flat.size) if n_probe is None or n_probe >= flat.size else rng.choice(flat.size, n_probe, replace=False)
        floor = 1e-7 * max(float(np.max(np.abs(g))), 1e-300)
        tensor_worst = 0.0
        for j in idx:
            orig = flat[j]
            flat[j] = orig + eps
            lp, pat_p = loss()
            flat[j] = orig - eps
            lm, pat_m = loss()
            flat[j] = orig
            if pat_p is not None and not np.array_equal(pat_p, pat_m):
                kinks += 1
                continue
            num = (lp - lm) / (2 * eps)
            if not np.isfinite(num):
                raise NonFiniteGradientError(f"non-finite numerical gradient for {name}[{j}]")
            rel = abs(g[j] - num) / max(abs(g[j]), abs(num), floor)
            tensor_worst = max(tensor_worst, rel)
            checked += 1
        per_tensor[name] = tensor_worst
        worst = max(worst, tensor_worst)
    model.forward(z)
    return GradCheckResult(worst, checked, kinks, per_tensor)
