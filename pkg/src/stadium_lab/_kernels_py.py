"""Pure numpy versions of the compiled kernels in ``_kernels.pyx``."""

import numpy as np

_QA, _QB = 2.0 / 3.0, 1.0 / 6.0
_BARY = np.array([[_QA, _QB, _QB], [_QB, _QA, _QB], [_QB, _QB, _QA]])
_MASS_REF = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]).ravel() / 12.0


def _edges(xy, tri):
    p0, p1, p2 = xy[tri[:, 0]], xy[tri[:, 1]], xy[tri[:, 2]]
    bx = np.stack([p2[:, 0] - p1[:, 0], p0[:, 0] - p2[:, 0], p1[:, 0] - p0[:, 0]], 1)
    by = np.stack([p1[:, 1] - p2[:, 1], p2[:, 1] - p0[:, 1], p0[:, 1] - p1[:, 1]], 1)
    t = 0.5 * ((p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1]) - (p2[:, 0] - p0[:, 0]) * (p1[:, 1] - p0[:, 1]))
    return bx, by, t


def p1_forms(xy, tri):
    bx, by, t = _edges(xy, tri)
    with np.errstate(divide="ignore", invalid="ignore"):
        ke = (bx[:, :, None] * bx[:, None, :] + by[:, :, None] * by[:, None, :]) / (4.0 * t[:, None, None])
    ke[t == 0] = 0.0
    me = t[:, None] * _MASS_REF[None, :]
    return ke.reshape(-1, 9), me, t


def weighted_mass(xy, tri, wq):
    _, _, t = _edges(xy, tri)
    local = np.einsum("eq,qi,qj->eij", wq, _BARY, _BARY)
    return (local * (t / 3.0)[:, None, None]).reshape(-1, 9)


def p1_gradients(xy, tri, u):
    bx, by, t = _edges(xy, tri)
    ue = u[tri]
    t2 = 2.0 * t
    gx = np.einsum("ei,ei->e", ue, by) / t2
    gy = np.einsum("ei,ei->e", ue, bx) / t2
    return np.stack([gx, gy], 1)
