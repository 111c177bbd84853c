"""Compiled numerical core: counter-based RNG streams, ray/BVH queries,
interface physics, and the full emission-traversal-deposit loop.

Everything here is scalar nopython code. The public modules wrap these
functions; the trace loop calls them directly so there is exactly one
implementation of each physical formula.
"""

import math

import numpy as np
from numba import njit

_U = np.uint64
_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_INV53 = 1.0 / 9007199254740992.0

# geometry tolerances (meters unless noted)
SELF_INTERSECT_OFFSET = 1e-4
_TRI_EPS = 1e-12
_DET_EPS = 1e-14

# resampling budget for scatter directions that land below the surface
SCATTER_ATTEMPTS = 8


# ---------------------------------------------------------------------------
# RNG: splitmix64 keyed per (seed, stream index); deposits are therefore
# identical for any partitioning of rays across workers.
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def rng_next(state):
    state = state + _GAMMA
    z = state
    z = (z ^ (z >> _U(30))) * _MIX1
    z = (z ^ (z >> _U(27))) * _MIX2
    z = z ^ (z >> _U(31))
    return state, (z >> _U(11)) * _INV53


@njit(cache=True, nogil=True)
def stream_init(seed, index):
    s = _U(seed) + _U(index) * _GAMMA
    # one warm-up step decorrelates consecutive stream keys
    s, _ = rng_next(s)
    return s


@njit(cache=True, nogil=True)
def fill_uniforms(state, out):
    for i in range(out.size):
        state, u = rng_next(state)
        out[i] = u
    return state


# ---------------------------------------------------------------------------
# Ray-triangle and BVH queries
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True, inline="always")
def _tri_hit(ox, oy, oz, dx, dy, dz,
             ax, ay, az, bx, by, bz, cx, cy, cz, t_max):
    """Moller-Trumbore; returns hit distance or -1.0."""
    e1x = bx - ax
    e1y = by - ay
    e1z = bz - az
    e2x = cx - ax
    e2y = cy - ay
    e2z = cz - az
    px = dy * e2z - dz * e2y
    py = dz * e2x - dx * e2z
    pz = dx * e2y - dy * e2x
    det = e1x * px + e1y * py + e1z * pz
    if -_DET_EPS < det < _DET_EPS:
        return -1.0
    inv = 1.0 / det
    sx = ox - ax
    sy = oy - ay
    sz = oz - az
    u = (sx * px + sy * py + sz * pz) * inv
    if u < -_TRI_EPS or u > 1.0 + _TRI_EPS:
        return -1.0
    qx = sy * e1z - sz * e1y
    qy = sz * e1x - sx * e1z
    qz = sx * e1y - sy * e1x
    v = (dx * qx + dy * qy + dz * qz) * inv
    if v < -_TRI_EPS or u + v > 1.0 + _TRI_EPS:
        return -1.0
    t = (e2x * qx + e2y * qy + e2z * qz) * inv
    if t <= _TRI_EPS or t > t_max:
        return -1.0
    return t


@njit(cache=True, nogil=True, inline="always")
def _safe_inv(d):
    if d > 1e-300 or d < -1e-300:
        return 1.0 / d
    return 1e300 if d >= 0.0 else -1e300


@njit(cache=True, nogil=True, inline="always")
def _slab_entry(ox, oy, oz, ix, iy, iz, mnx, mny, mnz, mxx, mxy, mxz, limit):
    """AABB slab test; returns entry distance, or inf when missed."""
    t1 = (mnx - ox) * ix
    t2 = (mxx - ox) * ix
    lo = min(t1, t2)
    hi = max(t1, t2)
    t1 = (mny - oy) * iy
    t2 = (mxy - oy) * iy
    lo = max(lo, min(t1, t2))
    hi = min(hi, max(t1, t2))
    t1 = (mnz - oz) * iz
    t2 = (mxz - oz) * iz
    lo = max(lo, min(t1, t2))
    hi = min(hi, max(t1, t2))
    if hi < max(lo, 0.0) or lo > limit:
        return math.inf
    return lo


@njit(cache=True, nogil=True)
def bvh_intersect(ox, oy, oz, dx, dy, dz, t_max,
                  node_min, node_max, node_child, node_range, tri_order,
                  v0, v1, v2):
    """Nearest triangle along the ray; returns (triangle index or -1, t)."""
    ix = _safe_inv(dx)
    iy = _safe_inv(dy)
    iz = _safe_inv(dz)
    best = -1
    best_t = t_max
    stack = np.empty(128, np.int32)
    if _slab_entry(ox, oy, oz, ix, iy, iz,
                   node_min[0, 0], node_min[0, 1], node_min[0, 2],
                   node_max[0, 0], node_max[0, 1], node_max[0, 2],
                   best_t) == math.inf:
        return best, best_t
    sp = 0
    stack[0] = 0
    sp = 1
    while sp > 0:
        sp -= 1
        node = stack[sp]
        left = node_child[node, 0]
        if left < 0:
            first = node_range[node, 0]
            count = node_range[node, 1]
            for k in range(first, first + count):
                tri = tri_order[k]
                t = _tri_hit(ox, oy, oz, dx, dy, dz,
                             v0[tri, 0], v0[tri, 1], v0[tri, 2],
                             v1[tri, 0], v1[tri, 1], v1[tri, 2],
                             v2[tri, 0], v2[tri, 1], v2[tri, 2], best_t)
                if t > 0.0:
                    best_t = t
                    best = tri
        else:
            right = node_child[node, 1]
            tl = _slab_entry(ox, oy, oz, ix, iy, iz,
                             node_min[left, 0], node_min[left, 1],
                             node_min[left, 2], node_max[left, 0],
                             node_max[left, 1], node_max[left, 2], best_t)
            tr = _slab_entry(ox, oy, oz, ix, iy, iz,
                             node_min[right, 0], node_min[right, 1],
                             node_min[right, 2], node_max[right, 0],
                             node_max[right, 1], node_max[right, 2], best_t)
            # push far child first so the near one is traversed next
            if tl <= tr:
                if tr < math.inf:
                    stack[sp] = right
                    sp += 1
                if tl < math.inf:
                    stack[sp] = left
                    sp += 1
            else:
                if tl < math.inf:
                    stack[sp] = left
                    sp += 1
                if tr < math.inf:
                    stack[sp] = right
                    sp += 1
    return best, best_t


@njit(cache=True, nogil=True)
def bvh_occluded(ox, oy, oz, dx, dy, dz, t_max,
                 node_min, node_max, node_child, node_range, tri_order,
                 v0, v1, v2):
    """True when any triangle lies within (0, t_max) along the ray."""
    ix = _safe_inv(dx)
    iy = _safe_inv(dy)
    iz = _safe_inv(dz)
    stack = np.empty(128, np.int32)
    if _slab_entry(ox, oy, oz, ix, iy, iz,
                   node_min[0, 0], node_min[0, 1], node_min[0, 2],
                   node_max[0, 0], node_max[0, 1], node_max[0, 2],
                   t_max) == math.inf:
        return False
    stack[0] = 0
    sp = 1
    while sp > 0:
        sp -= 1
        node = stack[sp]
        left = node_child[node, 0]
        if left < 0:
            first = node_range[node, 0]
            count = node_range[node, 1]
            for k in range(first, first + count):
                tri = tri_order[k]
                t = _tri_hit(ox, oy, oz, dx, dy, dz,
                             v0[tri, 0], v0[tri, 1], v0[tri, 2],
                             v1[tri, 0], v1[tri, 1], v1[tri, 2],
                             v2[tri, 0], v2[tri, 1], v2[tri, 2], t_max)
                if t > 0.0:
                    return True
        else:
            right = node_child[node, 1]
            if _slab_entry(ox, oy, oz, ix, iy, iz,
                           node_min[left, 0], node_min[left, 1],
                           node_min[left, 2], node_max[left, 0],
                           node_max[left, 1], node_max[left, 2],
                           t_max) < math.inf:
                stack[sp] = left
                sp += 1
            if _slab_entry(ox, oy, oz, ix, iy, iz,
                           node_min[right, 0], node_min[right, 1],
                           node_min[right, 2], node_max[right, 0],
                           node_max[right, 1], node_max[right, 2],
                           t_max) < math.inf:
                stack[sp] = right
                sp += 1
    return False


# ---------------------------------------------------------------------------
# Interface physics
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True, inline="always")
def snell(dx, dy, dz, nx, ny, nz, eta):
    """Reflected/transmitted directions about a normal facing the ray.

    Returns (rx, ry, rz, tx, ty, tz, cos_r, cos_t, tir). On total internal
    reflection the transmitted direction and cos_t are zero and tir is True.
    """
    cos_r = -(dx * nx + dy * ny + dz * nz)
    rx = dx + 2.0 * cos_r * nx
    ry = dy + 2.0 * cos_r * ny
    rz = dz + 2.0 * cos_r * nz
    disc = 1.0 - eta * eta * (1.0 - cos_r * cos_r)
    if disc < 0.0:
        return rx, ry, rz, 0.0, 0.0, 0.0, cos_r, 0.0, True
    cos_t = math.sqrt(disc)
    k = eta * cos_r - cos_t
    tx = eta * dx + k * nx
    ty = eta * dy + k * ny
    tz = eta * dz + k * nz
    return rx, ry, rz, tx, ty, tz, cos_r, cos_t, False


@njit(cache=True, nogil=True, inline="always")
def fresnel(z1, z2, cos_r, cos_t):
    """Signed pressure reflection amplitude at an impedance step."""
    return (z1 * cos_r - z2 * cos_t) / (z1 * cos_r + z2 * cos_t)


@njit(cache=True, nogil=True, inline="always")
def ggx_d(cos_nh, alpha):
    """Microfacet normal distribution; zero outside the upper hemisphere."""
    if cos_nh <= 0.0:
        return 0.0
    a2 = alpha * alpha
    t = cos_nh * cos_nh * (a2 - 1.0) + 1.0
    return a2 / (math.pi * t * t)


@njit(cache=True, nogil=True, inline="always")
def _frame(nx, ny, nz):
    """Orthonormal tangent pair for a unit normal."""
    if nz > 0.9 or nz < -0.9:
        ax, ay, az = 1.0, 0.0, 0.0
    else:
        ax, ay, az = 0.0, 0.0, 1.0
    t1x = ay * nz - az * ny
    t1y = az * nx - ax * nz
    t1z = ax * ny - ay * nx
    inv = 1.0 / math.sqrt(t1x * t1x + t1y * t1y + t1z * t1z)
    t1x *= inv
    t1y *= inv
    t1z *= inv
    t2x = ny * t1z - nz * t1y
    t2y = nz * t1x - nx * t1z
    t2z = nx * t1y - ny * t1x
    return t1x, t1y, t1z, t2x, t2y, t2z


@njit(cache=True, nogil=True, inline="always")
def sample_h(nx, ny, nz, alpha, u1, u2):
    """Microfacet normal from the cosine-weighted GGX lobe around n.

    Inverse-CDF mapping: tan^2(theta) = alpha^2 u1 / (1 - u1), phi = 2 pi u2.
    """
    tan2 = alpha * alpha * u1 / (1.0 - u1) if u1 < 1.0 else 1e30
    cos_t = 1.0 / math.sqrt(1.0 + tan2)
    sin_t = math.sqrt(max(0.0, 1.0 - cos_t * cos_t))
    phi = 2.0 * math.pi * u2
    t1x, t1y, t1z, t2x, t2y, t2z = _frame(nx, ny, nz)
    cp = math.cos(phi)
    sp = math.sin(phi)
    hx = sin_t * (cp * t1x + sp * t2x) + cos_t * nx
    hy = sin_t * (cp * t1y + sp * t2y) + cos_t * ny
    hz = sin_t * (cp * t1z + sp * t2z) + cos_t * nz
    return hx, hy, hz


@njit(cache=True, nogil=True)
def sample_h_batch(nx, ny, nz, alpha, state, out):
    """Sequential draws of sample_h into out[(m,3)]; returns final state."""
    for i in range(out.shape[0]):
        state, u1 = rng_next(state)
        state, u2 = rng_next(state)
        hx, hy, hz = sample_h(nx, ny, nz, alpha, u1, u2)
        out[i, 0] = hx
        out[i, 1] = hy
        out[i, 2] = hz
    return state


@njit(cache=True, nogil=True, inline="always")
def scatter(state, dx, dy, dz, nx, ny, nz, z1, z2, alpha):
    """One stochastic interface interaction.

    Perturbs the normal with a GGX microfacet, branches between reflection
    and transmission on the squared Fresnel amplitude, and retries when the
    outgoing direction falls below the geometric surface. Returns
    (state, ox, oy, oz, sign, density, ok); ok is False when the retry
    budget is exhausted and the path must be killed.
    """
    eta = z1 / z2
    for _ in range(SCATTER_ATTEMPTS):
        state, u1 = rng_next(state)
        state, u2 = rng_next(state)
        hx, hy, hz = sample_h(nx, ny, nz, alpha, u1, u2)
        cos_r = -(dx * hx + dy * hy + dz * hz)
        if cos_r <= 1e-12:
            continue
        disc = 1.0 - eta * eta * (1.0 - cos_r * cos_r)
        if disc < 0.0:
            reflect = True
            a_r = 1.0
            cos_t = 0.0
        else:
            cos_t = math.sqrt(disc)
            a_r = fresnel(z1, z2, cos_r, cos_t)
            state, u3 = rng_next(state)
            reflect = u3 < a_r * a_r
        cos_nh = nx * hx + ny * hy + nz * hz
        density = ggx_d(cos_nh, alpha) * cos_nh
        if reflect:
            ox = dx + 2.0 * cos_r * hx
            oy = dy + 2.0 * cos_r * hy
            oz = dz + 2.0 * cos_r * hz
            if ox * nx + oy * ny + oz * nz > 1e-12:
                sign = 1.0 if a_r >= 0.0 else -1.0
                return state, ox, oy, oz, sign, density, True
        else:
            k = eta * cos_r - cos_t
            ox = eta * dx + k * hx
            oy = eta * dy + k * hy
            oz = eta * dz + k * hz
            if ox * nx + oy * ny + oz * nz < -1e-12:
                return state, ox, oy, oz, 1.0, density, True
    return state, 0.0, 0.0, 0.0, 0.0, 0.0, False


@njit(cache=True, nogil=True, inline="always")
def eval_reflect_toward(dx, dy, dz, tx, ty, tz, nx, ny, nz, z1, z2, alpha):
    """Directional density of reflecting an arrival d into target direction t.

    Squared Fresnel amplitude at the connecting microfacet times the
    cosine-weighted facet density times the half-vector Jacobian
    1 / (4 (t . h)); zero when t is below the surface.
    """
    if tx * nx + ty * ny + tz * nz <= 0.0:
        return 0.0
    hx = tx - dx
    hy = ty - dy
    hz = tz - dz
    norm = math.sqrt(hx * hx + hy * hy + hz * hz)
    if norm < 1e-12:
        return 0.0
    hx /= norm
    hy /= norm
    hz /= norm
    cos_nh = nx * hx + ny * hy + nz * hz
    if cos_nh <= 0.0:
        return 0.0
    cos_r = -(dx * hx + dy * hy + dz * hz)
    if cos_r <= 0.0:
        return 0.0
    eta = z1 / z2
    disc = 1.0 - eta * eta * (1.0 - cos_r * cos_r)
    if disc < 0.0:
        ar2 = 1.0
    else:
        a_r = fresnel(z1, z2, cos_r, math.sqrt(disc))
        ar2 = a_r * a_r
    th = tx * hx + ty * hy + tz * hz
    if th <= 1e-12:
        return 0.0
    return ar2 * ggx_d(cos_nh, alpha) * cos_nh / (4.0 * th)


@njit(cache=True, nogil=True, inline="always")
def receive_weight(cos_alpha, alpha_m, alpha_c):
    """Reception directivity ramp between main-beam and cutoff angles."""
    if cos_alpha > 1.0:
        cos_alpha = 1.0
    elif cos_alpha < -1.0:
        cos_alpha = -1.0
    a = math.acos(cos_alpha)
    if a > alpha_c:
        return 0.0
    if a <= alpha_m:
        return 1.0
    return (alpha_c - a) / (alpha_c - alpha_m)


# ---------------------------------------------------------------------------
# Emission
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True, inline="always")
def emit_ray(state, n_events, half_open, half_elev,
             ccx, ccy, ccz, lat, ax, elev, radius,
             steer, minproj, c_sound, rays_per_element):
    """Sample one primary ray from the curved emitter strip.

    Draw order: event, arc angle, elevational offset. The pressure weight is
    the cosine between the steering direction and the local surface normal,
    normalized by the per-element ray budget; the launch delay is the
    plane-wave delay of the sampled origin.
    """
    state, u = rng_next(state)
    ev = int(u * n_events)
    if ev >= n_events:
        ev = n_events - 1
    state, u = rng_next(state)
    phi = (2.0 * u - 1.0) * half_open
    state, u = rng_next(state)
    y = (2.0 * u - 1.0) * half_elev
    s = math.sin(phi)
    co = math.cos(phi)
    nx = s * lat[0] + co * ax[0]
    ny = s * lat[1] + co * ax[1]
    nz = s * lat[2] + co * ax[2]
    ox = ccx + radius * nx + y * elev[0]
    oy = ccy + radius * ny + y * elev[1]
    oz = ccz + radius * nz + y * elev[2]
    kx = steer[ev, 0]
    ky = steer[ev, 1]
    kz = steer[ev, 2]
    w = kx * nx + ky * ny + kz * nz
    if w < 0.0:
        w = 0.0
    w /= rays_per_element
    t0 = (ox * kx + oy * ky + oz * kz - minproj[ev]) / c_sound
    return state, ev, ox, oy, oz, kx, ky, kz, w, t0


@njit(cache=True, nogil=True)
def emit_batch(seed, start_index, n_events, half_open, half_elev,
               ccx, ccy, ccz, lat, ax, elev, radius,
               steer, minproj, c_sound, rays_per_element,
               origins, events, weights, delays):
    for i in range(origins.shape[0]):
        state = stream_init(seed, start_index + i)
        state, ev, ox, oy, oz, kx, ky, kz, w, t0 = emit_ray(
            state, n_events, half_open, half_elev,
            ccx, ccy, ccz, lat, ax, elev, radius,
            steer, minproj, c_sound, rays_per_element)
        origins[i, 0] = ox
        origins[i, 1] = oy
        origins[i, 2] = oz
        events[i] = ev
        weights[i] = w
        delays[i] = t0


# ---------------------------------------------------------------------------
# Delay-and-sum beamforming
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def das_pixels(samples, pix, steer, minproj, centers, c_sound, fs, out):
    """Sum delay-aligned channel samples into out[(n_pix,)] for a pixel
    block; returns the number of out-of-range sample accesses."""
    n_events = samples.shape[0]
    n_elements = samples.shape[1]
    n_samples = samples.shape[2]
    n_pix = pix.shape[0]
    oor = 0
    for a in range(n_events):
        kx = steer[a, 0]
        ky = steer[a, 1]
        kz = steer[a, 2]
        mp = minproj[a]
        for e in range(n_elements):
            cx = centers[e, 0]
            cy = centers[e, 1]
            cz = centers[e, 2]
            trace = samples[a, e]
            for i in range(n_pix):
                px = pix[i, 0]
                py = pix[i, 1]
                pz = pix[i, 2]
                tx = (px * kx + py * ky + pz * kz - mp) / c_sound
                ddx = px - cx
                ddy = py - cy
                ddz = pz - cz
                rx = math.sqrt(ddx * ddx + ddy * ddy + ddz * ddz) / c_sound
                s = (tx + rx) * fs
                i0 = int(math.floor(s))
                if i0 < 0 or i0 + 1 >= n_samples:
                    oor += 1
                    continue
                frac = s - i0
                out[i] += trace[i0] * (1.0 - frac) + trace[i0 + 1] * frac
    return oor


# ---------------------------------------------------------------------------
# Full trace loop
# ---------------------------------------------------------------------------

# stats slots
STAT_RAYS = 0
STAT_DEPOSITS = 1
STAT_OCCLUDED = 2
STAT_TRUNCATED = 3
STAT_KILLED = 4
STAT_BOUNCES = 5
STAT_ZERO_WEIGHT = 6

SECONDARY_BINARY = 0
SECONDARY_TRANSMISSIVE = 1


@njit(cache=True, nogil=True)
def trace_chunk(ray_start, ray_count, seed,
                v0, v1, v2, tri_n, tri_mesh,
                node_min, node_max, node_child, node_range, tri_order,
                mesh_mat, mat_z, mat_alpha, bg_mat,
                elem_c, elem_n, alpha_m, alpha_c,
                ccx, ccy, ccz, lat, ax, elev, radius, half_open, half_elev,
                steer, minproj,
                c_sound, rays_per_element, max_bounces, max_path_len,
                fs, secondary_mode, max_sec,
                samples, stats, ev_deposits):
    """Trace rays [ray_start, ray_start + ray_count) into the sample buffer."""
    n_events = steer.shape[0]
    n_elements = elem_c.shape[0]
    n_samples = samples.shape[2]
    nee_scale = float(n_elements) * float(n_events)
    bg_z = mat_z[bg_mat]
    eps = SELF_INTERSECT_OFFSET

    for ray in range(ray_start, ray_start + ray_count):
        state = stream_init(seed, ray)
        state, ev, px, py, pz, dx, dy, dz, thr, t0 = emit_ray(
            state, n_events, half_open, half_elev,
            ccx, ccy, ccz, lat, ax, elev, radius,
            steer, minproj, c_sound, rays_per_element)
        stats[STAT_RAYS] += 1
        if thr <= 0.0:
            stats[STAT_ZERO_WEIGHT] += 1
            continue
        path_len = 0.0
        for _bounce in range(max_bounces):
            t_rem = max_path_len - path_len
            if t_rem <= eps:
                break
            tri, t_hit = bvh_intersect(
                px + eps * dx, py + eps * dy, pz + eps * dz,
                dx, dy, dz, t_rem - eps,
                node_min, node_max, node_child, node_range, tri_order,
                v0, v1, v2)
            if tri < 0:
                break
            t_hit += eps
            path_len += t_hit
            hx = px + t_hit * dx
            hy = py + t_hit * dy
            hz = pz + t_hit * dz
            gnx = tri_n[tri, 0]
            gny = tri_n[tri, 1]
            gnz = tri_n[tri, 2]
            front = gnx * dx + gny * dy + gnz * dz < 0.0
            if not front:
                gnx = -gnx
                gny = -gny
                gnz = -gnz
            mat = mesh_mat[tri_mesh[tri]]
            if front:
                z1 = bg_z
                z2 = mat_z[mat]
            else:
                z1 = mat_z[mat]
                z2 = bg_z
            rough = mat_alpha[mat]

            # next-event deposit toward one uniformly chosen element center
            state, u = rng_next(state)
            target = int(u * n_elements)
            if target >= n_elements:
                target = n_elements - 1
            sx = elem_c[target, 0] - hx
            sy = elem_c[target, 1] - hy
            sz = elem_c[target, 2] - hz
            dist = math.sqrt(sx * sx + sy * sy + sz * sz)
            if dist > 1e-9:
                sx /= dist
                sy /= dist
                sz /= dist
                # arrival angle is measured from the element normal to the
                # direction element -> interaction point
                cos_in = -(elem_n[target, 0] * sx + elem_n[target, 1] * sy
                           + elem_n[target, 2] * sz)
                f_rec = receive_weight(cos_in, alpha_m, alpha_c)
                if f_rec > 0.0:
                    f_eval = eval_reflect_toward(
                        dx, dy, dz, sx, sy, sz, gnx, gny, gnz,
                        z1, z2, rough)
                    if f_eval > 0.0:
                        weight = thr * f_eval * f_rec * nee_scale
                        blocked = False
                        extra = 1.0
                        if secondary_mode == SECONDARY_BINARY:
                            blocked = bvh_occluded(
                                hx + eps * sx, hy + eps * sy, hz + eps * sz,
                                sx, sy, sz, dist - 2.0 * eps,
                                node_min, node_max, node_child, node_range,
                                tri_order, v0, v1, v2)
                        else:
                            wx = hx
                            wy = hy
                            wz = hz
                            remaining = dist
                            for _cross in range(max_sec + 1):
                                tri2, t2 = bvh_intersect(
                                    wx + eps * sx, wy + eps * sy,
                                    wz + eps * sz, sx, sy, sz,
                                    remaining - 2.0 * eps,
                                    node_min, node_max, node_child,
                                    node_range, tri_order, v0, v1, v2)
                                if tri2 < 0:
                                    break
                                if _cross == max_sec:
                                    blocked = True
                                    break
                                t2 += eps
                                fnx = tri_n[tri2, 0]
                                fny = tri_n[tri2, 1]
                                fnz = tri_n[tri2, 2]
                                cos_c = fnx * sx + fny * sy + fnz * sz
                                if cos_c < 0.0:
                                    zz1 = bg_z
                                    zz2 = mat_z[mesh_mat[tri_mesh[tri2]]]
                                    cos_c = -cos_c
                                else:
                                    zz1 = mat_z[mesh_mat[tri_mesh[tri2]]]
                                    zz2 = bg_z
                                eta2 = zz1 / zz2
                                disc2 = 1.0 - eta2 * eta2 * (1.0 - cos_c * cos_c)
                                if disc2 < 0.0:
                                    blocked = True
                                    break
                                a_r2 = fresnel(zz1, zz2, cos_c,
                                               math.sqrt(disc2))
                                extra *= (1.0 + a_r2) * (1.0 - a_r2 * a_r2)
                                wx += t2 * sx
                                wy += t2 * sy
                                wz += t2 * sz
                                remaining -= t2
                        if blocked:
                            stats[STAT_OCCLUDED] += 1
                        else:
                            t_arr = t0 + (path_len + dist) / c_sound
                            pos = t_arr * fs
                            i0 = int(pos)
                            frac = pos - i0
                            dropped = False
                            amp = weight * extra
                            if i0 < n_samples:
                                samples[ev, target, i0] += amp * (1.0 - frac)
                            else:
                                dropped = True
                            if i0 + 1 < n_samples:
                                samples[ev, target, i0 + 1] += amp * frac
                            else:
                                dropped = True
                            stats[STAT_DEPOSITS] += 1
                            ev_deposits[ev] += 1
                            if dropped:
                                stats[STAT_TRUNCATED] += 1

            state, nox, noy, noz, sign, _dens, ok = scatter(
                state, dx, dy, dz, gnx, gny, gnz, z1, z2, rough)
            stats[STAT_BOUNCES] += 1
            if not ok:
                stats[STAT_KILLED] += 1
                break
            thr *= sign
            px = hx
            py = hy
            pz = hz
            dx = nox
            dy = noy
            dz = noz
