"""Central finite-difference checks shared by the unit and acceptance tests."""
import numpy as np

REL_TOL = 1e-4
# below this gradient magnitude float64 roundoff of the difference quotient
# (about 1e-9 at h = 1e-6) dominates, so such coordinates are compared absolutely
SCALE_FLOOR = 1e-4
ABS_TOL = 1e-8


def rel_error(a, b, floor=1e-8):
    return abs(a - b) / max(abs(a), abs(b), floor)


def numeric_grad(f, x, h=1e-6):
    """Central differences of scalar ``f()`` w.r.t. every entry of array ``x`` (mutated in place, restored)."""
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + h
        fp = f()
        x[i] = old - h
        fm = f()
        x[i] = old
        g[i] = (fp - fm) / (2 * h)
    return g


def check_params(params, loss_fn, num_coords, rng, h=1e-6):
    """Compare backprop and central finite differences on random parameter coordinates.

    ``loss_fn()`` builds a fresh scalar Tensor from the current parameter
    values.  Returns a list of ``(name, index, analytic, numeric, rel_error)``.
    """
    params.zero_grad()
    loss_fn().backward()
    analytic = {k: v.copy() for k, v in params.grads().items()}
    names = [k for k, _ in params]
    sizes = np.array([params[k].data.size for k in names], dtype=float)
    out = []
    for _ in range(num_coords):
        name = names[int(rng.choice(len(names), p=sizes / sizes.sum()))]
        t = params[name]
        idx = tuple(int(rng.integers(s)) for s in t.shape)
        old = t.data[idx]
        t.data[idx] = old + h
        fp = float(loss_fn().data[0, 0])
        t.data[idx] = old - h
        fm = float(loss_fn().data[0, 0])
        t.data[idx] = old
        num = (fp - fm) / (2 * h)
        a = float(analytic[name][idx])
        out.append((name, idx, a, num, rel_error(a, num)))
    return out


def summarize(results):
    """Split results into strictly checked (|grad| >= SCALE_FLOOR) and near-zero coordinates.

    Returns ``(num_strict, worst_strict_rel_error, worst_near_zero_abs_error)``.
    """
    strict = [r for r in results if max(abs(r[2]), abs(r[3])) >= SCALE_FLOOR]
    small = [r for r in results if max(abs(r[2]), abs(r[3])) < SCALE_FLOOR]
    worst_rel = max((r[4] for r in strict), default=0.0)
    worst_abs = max((abs(r[2] - r[3]) for r in small), default=0.0)
    return len(strict), worst_rel, worst_abs


def passes(results, min_coords=20):
    n, worst_rel, worst_abs = summarize(results)
    return n >= min_coords and worst_rel <= REL_TOL and worst_abs <= ABS_TOL
