"""Pure-numpy implementations of the stencil-weight kernels.

Same API as the compiled module ``podnn._kernels``.  All loops over stencils
are expressed as stacked array operations so the fallback stays usable at
realistic node counts.
"""

import numpy as np

COMPILED = False


def imq_matrix(points, shape):
    """Pairwise inverse-multiquadric matrix phi(shape*||xi - xj||)."""
    pts = np.asarray(points, dtype=float)
    diff = pts[:, None, :] - pts[None, :, :]
    r2 = np.einsum("ijk,ijk->ij", diff, diff)
    return 1.0 / np.sqrt(1.0 + shape * shape * r2)


def _local_geometry(points, stencils, shape):
    pts = np.asarray(points, dtype=float)
    st = np.asarray(stencils, dtype=np.int64)
    loc = pts[st]                                   # (m, k, 2)
    diff = loc[:, :, None, :] - loc[:, None, :, :]
    r2 = np.einsum("mjkd,mjkd->mjk", diff, diff)
    a = 1.0 / np.sqrt(1.0 + shape * shape * r2)      # (m, k, k)
    d = loc[:, :1, :] - loc                          # center minus stencil pts
    s = 1.0 + shape * shape * np.einsum("mjd,mjd->mj", d, d)
    return a, d, s


def _helmholtz_rhs(d, s, shape, mu1, mu2):
    """Closed-form (-dxx - mu1*dyy - mu2) applied to the IMQ basis at the center."""
    e2 = shape * shape
    e4 = e2 * e2
    s32 = s ** -1.5
    s52 = s ** -2.5
    bxx = e2 * s32 - 3.0 * e4 * d[..., 0] ** 2 * s52
    byy = e2 * s32 - 3.0 * e4 * d[..., 1] ** 2 * s52
    bid = -(s ** -0.5)
    return bxx + mu1 * byy + mu2 * bid


def helmholtz_weights(points, stencils, shape, mu1, mu2):
    """Stencil weights of (-dxx - mu1*dyy - mu2) for every interior node.

    Returns an (n_interior, n_loc) array; row i solves the local IMQ
    collocation system of stencil i.
    """
    a, d, s = _local_geometry(points, stencils, shape)
    rhs = _helmholtz_rhs(d, s, shape, mu1, mu2)
    try:
        w = np.linalg.solve(a, rhs[..., None])[..., 0]
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"singular local system: {exc}") from exc
    if not np.all(np.isfinite(w)):
        bad = int(np.argwhere(~np.isfinite(w).all(axis=1))[0, 0])
        raise np.linalg.LinAlgError(f"non-finite stencil weights at interior node {bad}")
    return w


def helmholtz_weight_components(points, stencils, shape):
    """Mu-independent weight components (w_xx, w_yy) for the affine split.

    The full weights are w_xx + mu1*w_yy - mu2*e_center; the identity part is
    exact because the center column of the local matrix is its own right-hand
    side.
    """
    a, d, s = _local_geometry(points, stencils, shape)
    e2 = shape * shape
    e4 = e2 * e2
    s32 = s ** -1.5
    s52 = s ** -2.5
    bxx = e2 * s32 - 3.0 * e4 * d[..., 0] ** 2 * s52
    byy = e2 * s32 - 3.0 * e4 * d[..., 1] ** 2 * s52
    rhs = np.stack([bxx, byy], axis=-1)              # (m, k, 2)
    try:
        w = np.linalg.solve(a, rhs)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"singular local system: {exc}") from exc
    if not np.all(np.isfinite(w)):
        bad = int(np.argwhere(~np.isfinite(w).all(axis=(1, 2)))[0, 0])
        raise np.linalg.LinAlgError(f"non-finite stencil weights at interior node {bad}")
    return w[..., 0], w[..., 1]
