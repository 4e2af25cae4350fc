"""Named diffusion models and domains used by the experiment runner."""
from __future__ import annotations

import numpy as np

from .diffusion import DiffusionModel, ball, box, interval
from .errors import ParameterError

MODEL_NAMES = ("bm-interval", "bm-disk", "drifted-interval", "custom-polynomial")


def brownian(dim, name="bm"):
    def drift(x):
        return np.zeros(dim)

    def diffusion(x):
        return np.eye(dim)

    return DiffusionModel(dim, drift, diffusion, dim, name=name)


def constant_drift(c, name="drifted"):
    c = np.atleast_1d(np.asarray(c, dtype=float))
    dim = c.size

    def drift(x):
        return c.copy()

    def diffusion(x):
        return np.eye(dim)

    return DiffusionModel(dim, drift, diffusion, dim, name=name)


def polynomial(drift_coeffs, diffusion_coeffs, name="custom-polynomial"):
    """Separable polynomial coefficients.

    Row ``i`` of ``drift_coeffs`` gives ``b_i(x) = sum_k a[i, k] x_i**k``; row ``i``
    of ``diffusion_coeffs`` gives the diagonal entry ``sigma_ii(x)`` the same way
    (so ``noise_dim == dim``).
    """
    a = np.atleast_2d(np.asarray(drift_coeffs, dtype=float))
    s = np.atleast_2d(np.asarray(diffusion_coeffs, dtype=float))
    if a.shape[0] != s.shape[0]:
        raise ParameterError("drift and diffusion coefficient arrays need one row per dimension")
    dim = a.shape[0]

    def drift(x):
        out = np.zeros(dim)
        for i in range(dim):
            p = 1.0
            for k in range(a.shape[1]):
                out[i] += a[i, k] * p
                p *= x[i]
        return out

    def diffusion(x):
        out = np.zeros((dim, dim))
        for i in range(dim):
            p = 1.0
            for k in range(s.shape[1]):
                out[i, i] += s[i, k] * p
                p *= x[i]
        return out

    return DiffusionModel(dim, drift, diffusion, dim, name=name)


def make_domain(spec):
    """Build a domain from ``{"kind": "interval"|"ball"|"box", ...}``."""
    spec = dict(spec)
    kind = spec.pop("kind", None)
    builders = {
        "interval": lambda: interval(spec.pop("a", 0.0), spec.pop("b", 1.0)),
        "ball": lambda: ball(spec.pop("center"), spec.pop("radius", 1.0)),
        "box": lambda: box(spec.pop("lo"), spec.pop("hi")),
    }
    if kind not in builders:
        raise ParameterError(f"unknown domain kind {kind!r}")
    try:
        dom = builders[kind]()
    except KeyError as exc:
        raise ParameterError(f"domain {kind!r} is missing field {exc.args[0]!r}") from None
    if spec:
        raise ParameterError(f"unknown domain fields {sorted(spec)}")
    return dom


_BUILT = {}


def make_model(name, params=None, domain=None):
    """Return ``(model, domain)`` for a registry name.

    ``params`` carries model parameters (``c`` for "drifted-interval";
    ``drift_coeffs``/``diffusion_coeffs`` for "custom-polynomial"); ``domain``
    overrides the model's default domain.  Results are cached per argument
    set so the compiled stepping kernel is reused.
    """
    key = (name, repr(sorted((params or {}).items())), repr(domain))
    if key not in _BUILT:
        _BUILT[key] = _make_model(name, params, domain)
    return _BUILT[key]


def _make_model(name, params, domain):
    params = dict(params or {})
    if name == "bm-interval":
        model, default = brownian(1, name), {"kind": "interval", "a": 0.0, "b": 1.0}
    elif name == "bm-disk":
        model, default = brownian(2, name), {"kind": "ball", "center": [0.0, 0.0], "radius": 1.0}
    elif name == "drifted-interval":
        model = constant_drift([params.pop("c", 0.0)], name)
        default = {"kind": "interval", "a": 0.0, "b": 1.0}
    elif name == "custom-polynomial":
        try:
            model = polynomial(params.pop("drift_coeffs"), params.pop("diffusion_coeffs"))
        except KeyError as exc:
            raise ParameterError(f"custom-polynomial needs {exc.args[0]!r}") from None
        default = None
    else:
        raise ParameterError(f"unknown model {name!r}; choose from {MODEL_NAMES}")
    if params:
        raise ParameterError(f"unknown parameters for {name}: {sorted(params)}")
    spec = domain if domain is not None else default
    if spec is None:
        raise ParameterError(f"model {name!r} needs an explicit domain")
    dom = make_domain(spec)
    if dom.dim != model.dim:
        raise ParameterError(f"domain dimension {dom.dim} != model dimension {model.dim}")
    return model, dom
