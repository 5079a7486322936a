"""Dormand-Prince 5(4) integrator with PI step control and dense output.

The kernel is compiled with numba and is generic over the right-hand side,
which must be an ``@njit`` function with signature ``rhs(t, y, par, out)``.
"""

import numpy as np
from numba import njit

# status codes returned by the kernel
OK = 0
STEP_UNDERFLOW = 1
NON_FINITE = 2
MAX_STEPS = 3

# Butcher tableau
C2, C3, C4, C5 = 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0
A21 = 1.0 / 5.0
A31, A32 = 3.0 / 40.0, 9.0 / 40.0
A41, A42, A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
A51, A52, A53, A54 = (19372.0 / 6561.0, -25360.0 / 2187.0,
                      64448.0 / 6561.0, -212.0 / 729.0)
A61, A62, A63, A64, A65 = (9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0,
                           49.0 / 176.0, -5103.0 / 18656.0)
A71, A73, A74, A75, A76 = (35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0,
                           -2187.0 / 6784.0, 11.0 / 84.0)
# 5th minus embedded 4th order weights
E1, E3, E4, E5, E6, E7 = (71.0 / 57600.0, -71.0 / 16695.0, 71.0 / 1920.0,
                          -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0)
# continuous extension (Hairer, Norsett & Wanner, dopri5 contd5)
D1, D3, D4, D5, D6, D7 = (-12715105075.0 / 11282082432.0,
                          87487479700.0 / 32700410799.0,
                          -10690763975.0 / 1880347072.0,
                          701980252875.0 / 199316789632.0,
                          -1453857185.0 / 822651844.0,
                          69997945.0 / 29380423.0)

SAFE = 0.9
FAC_MIN = 0.2    # step may shrink to h*FAC_MIN at most
FAC_MAX = 10.0   # and grow to h*FAC_MAX at most
BETA = 0.04      # PI stabilisation exponent
EXPO1 = 0.2 - BETA * 0.75


@njit(cache=True)
def _initial_step(rhs, t, y, par, f0, rtol, atol, max_step):
    n = y.shape[0]
    sk = np.empty(n)
    dnf = 0.0
    dny = 0.0
    for i in range(n):
        sk[i] = atol[i] + rtol * abs(y[i])
        dnf += (f0[i] / sk[i]) ** 2
        dny += (y[i] / sk[i]) ** 2
    if dnf <= 1e-10 or dny <= 1e-10:
        h = 1.0e-6
    else:
        h = 0.01 * np.sqrt(dny / dnf)
    h = min(h, max_step)
    y1 = y + h * f0
    f1 = np.empty(n)
    rhs(t + h, y1, par, f1)
    der2 = 0.0
    for i in range(n):
        der2 += ((f1[i] - f0[i]) / sk[i]) ** 2
    der2 = np.sqrt(der2 / n) / h
    der12 = max(abs(der2), np.sqrt(dnf / n))
    if der12 <= 1e-15:
        h1 = max(1.0e-6, abs(h) * 1.0e-3)
    else:
        h1 = (0.01 / der12) ** 0.2
    return min(100.0 * h, h1, max_step)


@njit(cache=True)
def dopri5(rhs, y0, par, t_end, sample_dt, rtol, atol, max_step,
           max_steps):
    """Integrate from t=0 to ``t_end`` sampling every ``sample_dt``.

    Returns ``(status, samples, n_accepted, n_rejected)``.
    Samples are taken at ``k * sample_dt`` for ``k = 0 .. floor(t_end/dt)``.
    """
    n = y0.shape[0]
    n_samples = int(np.floor(t_end / sample_dt + 1e-9)) + 1
    out = np.full((n_samples, n), np.nan)
    y = y0.copy()
    out[0, :] = y
    next_k = 1

    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    k5 = np.empty(n)
    k6 = np.empty(n)
    k7 = np.empty(n)
    ytmp = np.empty(n)
    ynew = np.empty(n)
    r5 = np.empty(n)

    t = 0.0
    rhs(t, y, par, k1)
    h = _initial_step(rhs, t, y, par, k1, rtol, atol, max_step)
    facold = 1.0e-4
    n_acc = 0
    n_rej = 0
    reject = False
    status = OK

    while t < t_end:
        if n_acc + n_rej >= max_steps:
            status = MAX_STEPS
            break
        if h < 10.0 * 2.2e-16 * max(abs(t), 1.0):
            status = STEP_UNDERFLOW
            break
        if t + h > t_end:
            h = t_end - t

        for i in range(n):
            ytmp[i] = y[i] + h * A21 * k1[i]
        rhs(t + C2 * h, ytmp, par, k2)
        for i in range(n):
            ytmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i])
        rhs(t + C3 * h, ytmp, par, k3)
        for i in range(n):
            ytmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])
        rhs(t + C4 * h, ytmp, par, k4)
        for i in range(n):
            ytmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i]
                                  + A54 * k4[i])
        rhs(t + C5 * h, ytmp, par, k5)
        for i in range(n):
            ytmp[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i]
                                  + A64 * k4[i] + A65 * k5[i])
        rhs(t + h, ytmp, par, k6)
        for i in range(n):
            ynew[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i]
                                  + A75 * k5[i] + A76 * k6[i])
        rhs(t + h, ynew, par, k7)

        err = 0.0
        finite = True
        for i in range(n):
            if not np.isfinite(ynew[i]):
                finite = False
            sk = atol[i] + rtol * max(abs(y[i]), abs(ynew[i]))
            e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i]
                     + E6 * k6[i] + E7 * k7[i])
            err += (e / sk) ** 2
        if not finite:
            # shrink and retry; a persistently non-finite state ends the run
            if h < 1e-8 * max_step:
                status = NON_FINITE
                break
            h *= 0.25
            n_rej += 1
            reject = True
            continue
        err = np.sqrt(err / n)

        fac11 = err ** EXPO1
        fac = fac11 / facold ** BETA
        fac = max(1.0 / FAC_MAX, min(1.0 / FAC_MIN, fac / SAFE))
        hnew = h / fac

        if err <= 1.0:
            # dense output coefficients for this step
            for i in range(n):
                r5[i] = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i]
                             + D5 * k5[i] + D6 * k6[i] + D7 * k7[i])
            t_new = t + h
            while next_k < n_samples:
                ts = next_k * sample_dt
                if ts > t_new + 1e-12 * max(1.0, t_new):
                    break
                theta = (ts - t) / h
                th1 = 1.0 - theta
                for i in range(n):
                    ydiff = ynew[i] - y[i]
                    bspl = h * k1[i] - ydiff
                    out[next_k, i] = y[i] + theta * (
                        ydiff + th1 * (bspl + theta * (
                            ydiff - h * k7[i] - bspl + th1 * r5[i])))
                next_k += 1

            facold = max(err, 1.0e-4)
            n_acc += 1
            t = t_new
            for i in range(n):
                y[i] = ynew[i]
                k1[i] = k7[i]
            if abs(hnew) > max_step:
                hnew = max_step
            if reject:
                hnew = min(abs(hnew), abs(h))
            reject = False
            h = hnew
        else:
            hnew = h / min(1.0 / FAC_MIN, fac11 / SAFE)
            reject = True
            n_rej += 1
            h = hnew

    return status, out, n_acc, n_rej
