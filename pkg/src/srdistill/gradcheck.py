"""Central finite-difference checks for the analytic gradients in :mod:`edl`."""

from __future__ import annotations

import numpy as np

from . import edl

MIN_COORDS = 64
# near the cube root of float64 epsilon: balances truncation against roundoff
SUITE_EPSILON = 1e-5
# keeps every L1 argument away from its kink by far more than any step
_KINK_MARGIN = 1e-3


class GradCheckError(ArithmeticError):
    pass


def grad_check(fn, x, grad, epsilon: float = 1e-6, n_coords: int = MIN_COORDS, seed: int = 0) -> float:
    """Maximum relative error between ``grad`` and central differences of ``fn``.

    ``fn`` maps an array shaped like ``x`` to a scalar. Up to ``n_coords``
    coordinates are sampled (all of them when ``x`` is smaller). The relative
    error uses ``max(|analytic|, |numeric|, 1e-8)`` as the denominator.
    """
    if not 1e-6 <= epsilon <= 1e-3:
        raise ValueError(f"epsilon must lie in [1e-6, 1e-3], got {epsilon}")
    x = np.array(x, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64).reshape(x.shape)
    flat = x.reshape(-1)
    n = flat.size
    rng = np.random.default_rng(seed)
    coords = np.arange(n) if n <= n_coords else rng.choice(n, size=n_coords, replace=False)

    worst = 0.0
    for i in coords:
        orig = flat[i]
        flat[i] = orig + epsilon
        f_plus = fn(x)
        flat[i] = orig - epsilon
        f_minus = fn(x)
        flat[i] = orig
        if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
            raise GradCheckError(f"non-finite loss at perturbed coordinate {int(i)}")
        numeric = (f_plus - f_minus) / (2.0 * epsilon)
        analytic = grad.reshape(-1)[i]
        err = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-8)
        worst = max(worst, float(err))
    return worst


# ---------------------------------------------------------------- seeded instances


def _away_from(rng, ref, scale=0.5):
    # ref + offset with |offset| in [margin, scale]
    mag = rng.uniform(_KINK_MARGIN * 10, scale, ref.shape)
    return ref + mag * rng.choice([-1.0, 1.0], ref.shape)


def _clear_of_kinks(*diffs) -> bool:
    return all(np.abs(d).min() > _KINK_MARGIN for d in diffs)


def make_instance(rng, shape=(6, 6, 3), n_scores=4, f=None):
    """Random tensors for one gradient-suite instance.

    Draws are repeated until every L1 argument (pixel differences, feature
    differences, masked-branch differences) is clear of zero, so the checks
    never straddle a non-differentiable point.
    """
    f = f or edl.ConvFeatureExtractor(shape[2])
    while True:
        hr = rng.uniform(0.0, 1.0, shape)
        sr = _away_from(rng, hr)
        i_x = rng.uniform(-0.5, 1.5, shape)
        i_y = rng.uniform(-0.5, 1.5, shape)
        mask = edl.softmax_mask(rng.normal(0.0, 1.0, shape))
        z = mask * i_x + (1.0 - mask) * i_y
        if _clear_of_kinks(sr - hr, f(sr) - f(hr), (1.0 - mask) * i_y - hr, f(z) - f(hr), z - hr):
            break
    return {
        "hr": hr,
        "sr": sr,
        "i_x": i_x,
        "i_y": i_y,
        "mask": mask,
        "d_sr": rng.normal(0.0, 2.0, n_scores),
        "d_hr": rng.normal(0.0, 2.0, n_scores),
        "logits": rng.normal(0.0, 2.0, shape),
    }


def _checks_for(inst, f_mock, seed):
    ident = edl.IdentityExtractor()
    hr = inst["hr"]
    weights = edl.LossWeights(1.0, 1.0, 1.0)

    def check(fn, x, g):
        return grad_check(fn, x, g, epsilon=SUITE_EPSILON, seed=seed)

    out = {}
    _, g = edl.pixel_loss(inst["sr"], hr)
    out["pixel"] = check(lambda s: edl.pixel_loss(s, hr)[0], inst["sr"], g)

    for name, f in (("perceptual_identity", ident), ("perceptual_mock", f_mock)):
        _, g = edl.perceptual_loss(inst["sr"], hr, f)
        out[name] = check(lambda s, f=f: edl.perceptual_loss(s, hr, f)[0], inst["sr"], g)

    d_sr, d_hr = inst["d_sr"], inst["d_hr"]
    _, g_sr, g_hr = edl.adversarial_loss(d_sr, d_hr)
    out["adversarial"] = max(
        check(lambda d: edl.adversarial_loss(d, d_hr)[0], d_sr, g_sr),
        check(lambda d: edl.adversarial_loss(d_sr, d)[0], d_hr, g_hr),
    )

    # probe direction fixed per instance; the scalar <v, softmax(m)> has gradient vjp(m, v)
    v = np.cos(np.arange(inst["logits"].size)).reshape(inst["logits"].shape)
    out["softmax_mask"] = check(
        lambda m: float((v * edl.softmax_mask(m)).sum()), inst["logits"], edl.softmax_mask_vjp(inst["logits"], v)
    )

    i_x, i_y, mask = inst["i_x"], inst["i_y"], inst["mask"]
    r = edl.edl_composite_loss(i_x, i_y, mask, hr, f_mock, d_sr, d_hr)
    out["composite"] = max(
        check(lambda t: edl.edl_composite_loss(t, i_y, mask, hr, f_mock, d_sr, d_hr).total, i_x, r.grad_x),
        check(lambda t: edl.edl_composite_loss(i_x, t, mask, hr, f_mock, d_sr, d_hr).total, i_y, r.grad_y),
        check(lambda t: edl.edl_composite_loss(i_x, i_y, t, hr, f_mock, d_sr, d_hr).total, mask, r.grad_mask),
        check(lambda t: edl.edl_composite_loss(i_x, i_y, mask, hr, f_mock, t, d_hr).total, d_sr, r.grad_d_sr),
    )

    b = edl.weighted_baseline_loss(inst["sr"], hr, weights, f_mock, d_sr, d_hr)
    out["baseline"] = max(
        check(lambda s: edl.weighted_baseline_loss(s, hr, weights, f_mock, d_sr, d_hr).total, inst["sr"], b.grad_sr),
        check(lambda d: edl.weighted_baseline_loss(inst["sr"], hr, weights, f_mock, d, d_hr).total, d_sr, b.grad_d_sr),
    )
    return out


def run_gradient_suite(seed: int = 0, instances: int = 20, shape=(6, 6, 3)) -> dict[str, float]:
    """Worst relative error per loss over ``instances`` seeded draws."""
    rng = np.random.default_rng(seed)
    f_mock = edl.ConvFeatureExtractor(shape[2], seed=seed)
    worst: dict[str, float] = {}
    for k in range(instances):
        inst = make_instance(rng, shape, f=f_mock)
        for name, err in _checks_for(inst, f_mock, seed + k).items():
            worst[name] = max(worst.get(name, 0.0), err)
    return worst
