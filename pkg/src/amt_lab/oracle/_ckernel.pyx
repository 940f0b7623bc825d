# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled penalty-contact stepper; mirrors ``_pykernel.integrate`` line for line."""
from libc.math cimport cos, sin, isfinite



def integrate(double[::1] state, double m, double inertia, double g, double r, double half,
              double k, double c, double ct, double dt, Py_ssize_t n_steps, double[:, ::1] out):
    cdef double x = state[0], y = state[1], p = state[2]
    cdef double vx = state[3], vy = state[4], w = state[5]
    cdef double cp, sp, fx, fy, tq, ox, oy, pen, fn, ft, s
    cdef Py_ssize_t i
    cdef int j
    for i in range(n_steps):
        cp = cos(p)
        sp = sin(p)
        fx = 0.0
        fy = -m * g
        tq = 0.0
        for j in range(2):
            s = -1.0 if j == 0 else 1.0
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
            if j == 0:
                out[i, 6] = ft
                out[i, 7] = fn
                out[i, 10] = pen
            else:
                out[i, 8] = ft
                out[i, 9] = fn
                out[i, 11] = pen
        vx += fx / m * dt
        vy += fy / m * dt
        w += tq / inertia * dt
        x += vx * dt
        y += vy * dt
        p += w * dt
        out[i, 0] = x
        out[i, 1] = y
        out[i, 2] = p
        out[i, 3] = vx
        out[i, 4] = vy
        out[i, 5] = w
        if not (isfinite(x) and isfinite(y) and isfinite(p)
                and isfinite(vx) and isfinite(vy) and isfinite(w)):
            state[0] = x; state[1] = y; state[2] = p
            state[3] = vx; state[4] = vy; state[5] = w
            return i
    state[0] = x; state[1] = y; state[2] = p
    state[3] = vx; state[4] = vy; state[5] = w
    return n_steps
