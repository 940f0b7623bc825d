"""Pure-Python twin of ``_ckernel``; same arithmetic, same column layout."""
import math

# columns written per step: post-step state, then the contact data that produced it
X, Y, PITCH, VX, VY, W, FBX, FBY, FFX, FFY, PEN_B, PEN_F = range(12)
NCOL = 12


def integrate(state, m, inertia, g, r, half, k, c, ct, dt, n_steps, out):
    """Advance ``state`` (x, y, pitch, vx, vy, w) in place by up to ``n_steps``.

    Row i of ``out`` receives the state after step i and the per-wheel contact
    forces and penetrations evaluated at the start of step i. Returns the
    number of steps taken; fewer than ``n_steps`` means the state went
    non-finite.
    """
    x, y, p = float(state[0]), float(state[1]), float(state[2])
    vx, vy, w = float(state[3]), float(state[4]), float(state[5])
    for i in range(n_steps):
        cp = math.cos(p)
        sp = math.sin(p)
        fx = 0.0
        fy = -m * g
        tq = 0.0
        row = out[i]
        for s in (-1.0, 1.0):
            ox = s * half * cp
            oy = s * half * sp
            pen = r - (y + oy)
            fn = 0.0
            ft = 0.0
            if pen > 0.0:
                fn = k * pen - c * (vy + w * ox)
                if fn < 0.0:
                    fn = 0.0
                elif ct != 0.0:
                    ft = -ct * (vx - w * oy)
                fx += ft
                fy += fn
                tq += ox * fn - (oy - r) * ft
            if s < 0.0:
                row[FBX] = ft
                row[FBY] = fn
                row[PEN_B] = pen
            else:
                row[FFX] = ft
                row[FFY] = fn
                row[PEN_F] = pen
        vx += fx / m * dt
        vy += fy / m * dt
        w += tq / inertia * dt
        x += vx * dt
        y += vy * dt
        p += w * dt
        row[X] = x
        row[Y] = y
        row[PITCH] = p
        row[VX] = vx
        row[VY] = vy
        row[W] = w
        if not (math.isfinite(x) and math.isfinite(y) and math.isfinite(p)
                and math.isfinite(vx) and math.isfinite(vy) and math.isfinite(w)):
            state[:] = [x, y, p, vx, vy, w]
            return i
    state[0] = x
    state[1] = y
    state[2] = p
    state[3] = vx
    state[4] = vy
    state[5] = w
    return n_steps
