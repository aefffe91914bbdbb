"""Perspective-n-point solving: EPnP minimal/refit solver, Gauss-Newton
reprojection refinement, and a seeded RANSAC loop.

EPnP expresses the unknown camera-frame points as fixed barycentric
combinations of four control points (three for near-coplanar inputs),
recovers the camera-frame control points from the null space of the
projection constraint matrix plus the inter-control-point distance
constraints, and reads the pose off a rigid alignment. Each hypothesis is
polished by a few Gauss-Newton steps on the reprojection error, so exact
correspondences recover the exact pose to machine precision.
"""

from __future__ import annotations

import numpy as np

from ..errors import DegenerateGeometry, TooFewCorrespondences
from ..geometry import CameraIntrinsics, axis_angle_to_matrix

_COLLINEAR_TOL = 1e-7  # second-moment ratio below which points are a line
_PLANAR_TOL = 1e-7  # third-moment ratio below which the planar branch runs


def _principal_frame(world):
    c0 = world.mean(axis=0)
    centered = world - c0
    cov = centered.T @ centered / len(world)
    vals, vecs = np.linalg.eigh(cov)
    return c0, vals[::-1], vecs[:, ::-1]


def _control_points(world):
    """Centroid + principal axes scaled by their spread; None if collinear."""
    c0, vals, vecs = _principal_frame(world)
    if vals[0] <= 0 or vals[1] / vals[0] < _COLLINEAR_TOL:
        return None
    planar = vals[2] / vals[0] < _PLANAR_TOL
    nc = 3 if planar else 4
    ctrl = [c0]
    for i in range(nc - 1):
        ctrl.append(c0 + np.sqrt(vals[i]) * vecs[:, i])
    return np.stack(ctrl)


def _barycentric(world, ctrl):
    basis = (ctrl[1:] - ctrl[0]).T  # 3 x (nc-1)
    rhs = (world - ctrl[0]).T
    if basis.shape[1] == 3:
        coeff = np.linalg.solve(basis, rhs).T
    else:
        coeff = np.linalg.lstsq(basis, rhs, rcond=None)[0].T
    return np.column_stack([1.0 - coeff.sum(axis=1), coeff])


def _constraint_matrix(alphas, pixels, intr):
    n, nc = alphas.shape
    m = np.zeros((2 * n, 3 * nc))
    du = intr.cx - pixels[:, 0]
    dv = intr.cy - pixels[:, 1]
    for j in range(nc):
        m[0::2, 3 * j] = alphas[:, j] * intr.fx
        m[0::2, 3 * j + 2] = alphas[:, j] * du
        m[1::2, 3 * j + 1] = alphas[:, j] * intr.fy
        m[1::2, 3 * j + 2] = alphas[:, j] * dv
    return m


def _beta_cases(l_mat, rho, pairs_products, nv):
    """Initial beta guesses from linearized distance constraints.

    pairs_products maps column index -> (a, b) meaning the unknown beta_a*beta_b.
    Returns a list of beta vectors (length nv each).
    """
    cases = []
    idx_of = {ab: i for i, ab in enumerate(pairs_products)}

    def solve_cols(cols):
        sub = l_mat[:, cols]
        sol, *_ = np.linalg.lstsq(sub, rho, rcond=None)
        return sol

    # case 1: assume [B_00, B_01, B_02, ...] (first row of the outer product)
    cols = [idx_of[(0, k)] for k in range(nv)]
    b = solve_cols(cols)
    betas = np.zeros(nv)
    if abs(b[0]) > 0:
        s = -1.0 if b[0] < 0 else 1.0
        betas[0] = np.sqrt(abs(b[0]))
        betas[1:] = s * b[1:] / betas[0]
    cases.append(betas)

    # case 2: assume only beta_0, beta_1 nonzero: [B_00, B_01, B_11]
    cols = [idx_of[(0, 0)], idx_of[(0, 1)], idx_of[(1, 1)]]
    b = solve_cols(cols)
    betas = np.zeros(nv)
    if b[0] < 0:
        betas[0] = np.sqrt(-b[0])
        betas[1] = np.sqrt(-b[2]) if b[2] < 0 else 0.0
    else:
        betas[0] = np.sqrt(b[0])
        betas[1] = np.sqrt(b[2]) if b[2] > 0 else 0.0
    if b[1] < 0:
        betas[0] = -betas[0]
    cases.append(betas)

    if nv >= 3:
        # case 3: beta_0..beta_2 nonzero: [B_00, B_01, B_11, B_02, B_12]
        cols = [idx_of[(0, 0)], idx_of[(0, 1)], idx_of[(1, 1)], idx_of[(0, 2)], idx_of[(1, 2)]]
        b = solve_cols(cols)
        betas = np.zeros(nv)
        if b[0] < 0:
            betas[0] = np.sqrt(-b[0])
            betas[1] = np.sqrt(-b[2]) if b[2] < 0 else 0.0
        else:
            betas[0] = np.sqrt(b[0])
            betas[1] = np.sqrt(b[2]) if b[2] > 0 else 0.0
        if b[1] < 0:
            betas[0] = -betas[0]
        if abs(betas[0]) > 0:
            betas[2] = b[3] / betas[0]
        cases.append(betas)
    return cases


def _refine_betas(betas, dv, rho, iters=8):
    """Gauss-Newton on || sum_k beta_k dv_k ||^2 = rho for each control pair."""
    betas = betas.copy()
    for _ in range(iters):
        combo = np.einsum("k,kpj->pj", betas, dv)  # (P,3)
        resid = np.einsum("pj,pj->p", combo, combo) - rho
        jac = 2.0 * np.einsum("pj,kpj->pk", combo, dv)
        try:
            delta, *_ = np.linalg.lstsq(jac, -resid, rcond=None)
        except np.linalg.LinAlgError:
            break
        betas += delta
        if np.linalg.norm(delta) < 1e-14:
            break
    return betas


def _kabsch(world, cam):
    """Rigid alignment: cam ~= R @ world + t."""
    wc, cc = world.mean(axis=0), cam.mean(axis=0)
    h = (world - wc).T @ (cam - cc)
    u, _, vt = np.linalg.svd(h)
    d = np.sign(np.linalg.det(vt.T @ u.T))
    r = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    return r, cc - r @ wc


def reprojection_sq_errors(world, pixels, intr, r, t):
    """Squared pixel errors; points at or behind the camera get +inf."""
    cam = world @ r.T + t
    z = cam[:, 2]
    err = np.full(len(world), np.inf)
    ok = z > 1e-9
    u = intr.fx * cam[ok, 0] / z[ok] + intr.cx
    v = intr.fy * cam[ok, 1] / z[ok] + intr.cy
    err[ok] = (u - pixels[ok, 0]) ** 2 + (v - pixels[ok, 1]) ** 2
    return err


def refine_pose(world, pixels, intr, r, t, iters=20):
    """Gauss-Newton minimization of reprojection error over SE(3).

    Update is a left-multiplied twist (dw, dt): cam' = exp(dw) cam + dt, so
    the jacobian of a camera point is [-skew(cam) | I].
    """
    r = r.copy()
    t = t.copy()
    n = len(world)
    for _ in range(iters):
        cam = world @ r.T + t
        z = cam[:, 2]
        if np.any(z <= 1e-9):
            break
        u = intr.fx * cam[:, 0] / z + intr.cx
        v = intr.fy * cam[:, 1] / z + intr.cy
        resid = np.empty(2 * n)
        resid[0::2] = u - pixels[:, 0]
        resid[1::2] = v - pixels[:, 1]
        inv_z = 1.0 / z
        ju = np.column_stack([intr.fx * inv_z, np.zeros(n), -intr.fx * cam[:, 0] * inv_z**2])
        jv = np.column_stack([np.zeros(n), intr.fy * inv_z, -intr.fy * cam[:, 1] * inv_z**2])
        jac = np.empty((2 * n, 6))
        # row_vec @ (-skew(c)) == cross(c, row_vec)
        jac[0::2, :3] = np.cross(cam, ju)
        jac[1::2, :3] = np.cross(cam, jv)
        jac[0::2, 3:] = ju
        jac[1::2, 3:] = jv
        jtj = jac.T @ jac
        jtr = jac.T @ resid
        try:
            delta = np.linalg.solve(jtj, -jtr)
        except np.linalg.LinAlgError:
            break
        dr = axis_angle_to_matrix(delta[:3])
        r = dr @ r
        t = dr @ t + delta[3:]
        if np.linalg.norm(delta) < 1e-14:
            break
    return r, t


def epnp(world, pixels, intr: CameraIntrinsics, polish_iters: int = 5):
    """One EPnP solve. Returns (R, t) or None for degenerate geometry."""
    world = np.asarray(world, dtype=float)
    pixels = np.asarray(pixels, dtype=float)
    ctrl = _control_points(world)
    if ctrl is None:
        return None
    nc = len(ctrl)
    alphas = _barycentric(world, ctrl)
    m = _constraint_matrix(alphas, pixels, intr)
    _, vecs = np.linalg.eigh(m.T @ m)
    nv = nc  # number of null-space candidates considered
    basis = vecs[:, :nv].T.reshape(nv, nc, 3)

    pairs = [(i, j) for i in range(nc) for j in range(i + 1, nc)]
    dv = np.stack([[b[i] - b[j] for i, j in pairs] for b in basis])  # (nv,P,3)
    rho = np.array([np.sum((ctrl[i] - ctrl[j]) ** 2) for i, j in pairs])

    products = []
    for a in range(nv):
        for b in range(a, nv):
            products.append((a, b))
    l_mat = np.empty((len(pairs), len(products)))
    for col, (a, b) in enumerate(products):
        factor = 1.0 if a == b else 2.0
        l_mat[:, col] = factor * np.einsum("pj,pj->p", dv[a], dv[b])

    best = None
    for betas in _beta_cases(l_mat, rho, products, nv):
        betas = _refine_betas(betas, dv, rho)
        cc = np.einsum("k,kcj->cj", betas, basis)
        cam = alphas @ cc
        if cam[:, 2].mean() < 0:
            cam = -cam
        if np.any(np.abs(cam[:, 2]) < 1e-12):
            continue
        r, t = _kabsch(world, cam)
        err = reprojection_sq_errors(world, pixels, intr, r, t)
        score = float(np.mean(err)) if np.all(np.isfinite(err)) else np.inf
        if best is None or score < best[0]:
            best = (score, r, t)
    if best is None or not np.isfinite(best[0]):
        return None
    _, r, t = best
    if polish_iters:
        r, t = refine_pose(world, pixels, intr, r, t, iters=polish_iters)
    return r, t


def ransac_pnp(
    world,
    pixels,
    intr: CameraIntrinsics,
    iterations: int = 1000,
    threshold_px: float = 2.0,
    confidence: float = 0.999,
    refine_iters: int = 20,
    seed: int = 0,
):
    """Robust pose from 2D-3D correspondences.

    Minimal EPnP on 4-point samples, inlier scoring by reprojection, final
    EPnP refit on the best inlier set followed by full Gauss-Newton
    refinement. Deterministic in ``seed``: fixed sampling schedule,
    confidence-based early exit, ties broken by earliest iteration.

    Returns (R, t, inlier_mask) with R, t mapping world -> camera frame.
    Raises TooFewCorrespondences (< 4 pairs) or DegenerateGeometry (every
    sampled set too close to collinear across all iterations).
    """
    world = np.asarray(world, dtype=float)
    pixels = np.asarray(pixels, dtype=float)
    n = len(world)
    if n < 4:
        raise TooFewCorrespondences(f"{n} correspondences, need >= 4")
    rng = np.random.default_rng(seed)
    thr2 = threshold_px**2

    best_mask = None
    best_count = 0
    best_rt = None
    needed = iterations
    it = 0
    while it < min(iterations, needed):
        it += 1
        sample = rng.choice(n, size=4, replace=False)
        sol = epnp(world[sample], pixels[sample], intr)
        if sol is None:
            continue
        err = reprojection_sq_errors(world, pixels, intr, *sol)
        mask = err <= thr2
        count = int(mask.sum())
        if count > best_count:
            best_count, best_mask, best_rt = count, mask, sol
            w = count / n
            if w >= 1.0:
                needed = it
            else:
                needed = int(np.ceil(np.log(1.0 - confidence) / np.log(1.0 - w**4)))

    if best_rt is None:
        raise DegenerateGeometry("no non-degenerate 4-point sample found")

    # refit on the consensus set, re-scoring until the inlier set stabilizes;
    # a small slack lets the least-squares fit shed lucky borderline inliers
    r, t = best_rt
    mask = best_mask
    slack = max(2, int(0.02 * n))
    for _ in range(3):
        if mask.sum() < 4:
            break
        refit = epnp(world[mask], pixels[mask], intr, polish_iters=0)
        rr, tt = refit if refit is not None else (r, t)
        rr, tt = refine_pose(world[mask], pixels[mask], intr, rr, tt, iters=refine_iters)
        new_mask = reprojection_sq_errors(world, pixels, intr, rr, tt) <= thr2
        if new_mask.sum() + slack < mask.sum():
            break  # refinement drifted on a corrupt set; keep the previous fit
        changed = not np.array_equal(new_mask, mask)
        r, t, mask = rr, tt, new_mask
        if not changed:
            break
    return r, t, mask
