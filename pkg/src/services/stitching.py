"""Zipper triangulation between two rows of vertices sorted by a common coordinate."""

import numpy as np

TWO_PI = 2.0 * np.pi


def zip_rows(
    lower: np.ndarray,
    lower_x: np.ndarray,
    upper: np.ndarray,
    upper_x: np.ndarray,
) -> list[tuple[int, int, int]]:
    """
    Triangulate the band between two open rows.

    Both rows are sorted by x and share their first and last x. The lower row
    lies below the upper one; triangles come out counter-clockwise.
    """
    n_lower, n_upper = len(lower), len(upper)
    i = j = 0
    faces = []
    while i < n_lower - 1 or j < n_upper - 1:
        if j == n_upper - 1 or (i < n_lower - 1 and lower_x[i + 1] <= upper_x[j + 1]):
            faces.append((int(lower[i]), int(lower[i + 1]), int(upper[j])))
            i += 1
        else:
            faces.append((int(lower[i]), int(upper[j + 1]), int(upper[j])))
            j += 1
    return faces


def zip_rings(
    outer: np.ndarray,
    outer_angle: np.ndarray,
    inner: np.ndarray,
    inner_angle: np.ndarray,
) -> list[tuple[int, int, int]]:
    """
    Triangulate the annulus between two closed rings.

    Angles increase counter-clockwise from a shared start at 0 and stay below
    2*pi. Triangles are counter-clockwise in the plane.
    """
    n_outer, n_inner = len(outer), len(inner)
    ox = np.append(np.asarray(outer_angle, dtype=np.float64), TWO_PI)
    ix = np.append(np.asarray(inner_angle, dtype=np.float64), TWO_PI)
    i = j = 0
    faces = []
    while i < n_outer or j < n_inner:
        if j == n_inner or (i < n_outer and ox[i + 1] <= ix[j + 1]):
            faces.append(
                (int(outer[i % n_outer]), int(outer[(i + 1) % n_outer]), int(inner[j % n_inner]))
            )
            i += 1
        else:
            faces.append(
                (int(outer[i % n_outer]), int(inner[(j + 1) % n_inner]), int(inner[j % n_inner]))
            )
            j += 1
    return faces


def fan(center: int, ring: np.ndarray) -> list[tuple[int, int, int]]:
    """Counter-clockwise fan from a center to a counter-clockwise ring."""
    n = len(ring)
    return [(int(center), int(ring[j]), int(ring[(j + 1) % n])) for j in range(n)]


def grid_quads(rows: np.ndarray, periodic: bool) -> list[tuple[int, int, int]]:
    """
    Split the quads of a (rows x cols) vertex index grid into triangles.

    Rows increase in y, columns in x; triangles are counter-clockwise in (x, y).
    With ``periodic`` the last column wraps to the first.
    """
    n_rows, n_cols = rows.shape
    faces = []
    col_stop = n_cols if periodic else n_cols - 1
    for k in range(n_rows - 1):
        for j in range(col_stop):
            jn = (j + 1) % n_cols
            a, b = rows[k, j], rows[k, jn]
            c, d = rows[k + 1, jn], rows[k + 1, j]
            faces.append((int(a), int(b), int(c)))
            faces.append((int(a), int(c), int(d)))
    return faces
