# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: tensor contraction, Metropolis chains on the sphere,
and the Crisanti-Sommers functional for step distribution functions.

Semantics match ``spinlab._fallback`` exactly (same inputs, same random
numbers); only floating-point summation order differs.
"""

import numpy as np
cimport numpy as cnp
from libc.stdlib cimport malloc, free
from libc.math cimport sqrt, exp, log, log1p, INFINITY
from scipy.linalg.cython_blas cimport dgemm, dgemv, ddot

cnp.import_array()


cdef double _contract(double* T, int p, int n, double* y, double* w1, double* w2) noexcept nogil:
    """T(y, ..., y) for a row-major n^p tensor, by repeated matrix-vector products."""
    cdef char trans = b'T'
    cdef int one = 1
    cdef double alpha = 1.0, beta0 = 0.0
    cdef int rows, lda = n
    cdef double* src = T
    cdef double* dst = w1
    cdef double* tmp
    cdef int level
    if p == 1:
        return ddot(&n, T, &one, y, &one)
    rows = 1
    for level in range(p - 1):
        rows *= n
    for level in range(p - 1):
        dgemv(&trans, &lda, &rows, &alpha, src, &lda, y, &one, &beta0, dst, &one)
        src = dst
        dst = w2 if src == w1 else w1
        rows //= n
    return ddot(&n, src, &one, y, &one)


cdef class _Model:
    cdef list arrays
    cdef int nterms
    cdef int n
    cdef double** ptrs
    cdef int* degrees
    cdef double* amps
    cdef double[::1] w1
    cdef double[::1] w2

    def __cinit__(self, tensors, degrees, amps, int n):
        cdef int i, pmax = 1
        cdef const double[::1] view
        self.arrays = [np.ascontiguousarray(t, dtype=np.float64).ravel() for t in tensors]
        self.nterms = len(self.arrays)
        self.n = n
        self.ptrs = <double**> malloc(max(self.nterms, 1) * sizeof(double*))
        self.degrees = <int*> malloc(max(self.nterms, 1) * sizeof(int))
        self.amps = <double*> malloc(max(self.nterms, 1) * sizeof(double))
        for i in range(self.nterms):
            view = self.arrays[i]
            self.ptrs[i] = <double*> &view[0]
            self.degrees[i] = int(degrees[i])
            self.amps[i] = float(amps[i])
            pmax = max(pmax, self.degrees[i])
        size = int(n) ** int(max(pmax - 1, 1))
        self.w1 = np.zeros(size)
        self.w2 = np.zeros(size)

    def __dealloc__(self):
        free(self.ptrs)
        free(self.degrees)
        free(self.amps)

    cdef double energy(self, double* y) noexcept:
        cdef double total = 0.0
        cdef int i
        for i in range(self.nterms):
            total += self.amps[i] * _contract(self.ptrs[i], self.degrees[i], self.n, y, &self.w1[0], &self.w2[0])
        return total

    cdef void energies(self, double* Y, int C, double* big, double* out) noexcept:
        """H at the C rows of Y (row-major C x n). The first contraction of each
        tensor is one matrix-matrix product over all rows, so the tensor is
        streamed once per call; ``big`` holds n^(p_max - 1) * C doubles."""
        cdef char tr = b'T', nt = b'N'
        cdef double one = 1.0, zero = 0.0
        cdef int i, c, level, rows, n = self.n, inc = 1
        for c in range(C):
            out[c] = 0.0
        for i in range(self.nterms):
            if self.degrees[i] == 1:
                for c in range(C):
                    out[c] += self.amps[i] * ddot(&n, self.ptrs[i], &inc, &Y[c * n], &inc)
                continue
            rows = 1
            for level in range(self.degrees[i] - 1):
                rows *= n
            # big[r + c rows] = sum_k T[r, k] Y[c, k]
            dgemm(&tr, &nt, &rows, &C, &n, &one, self.ptrs[i], &n, Y, &n, &zero, big, &rows)
            for c in range(C):
                out[c] += self.amps[i] * _contract(&big[c * rows], self.degrees[i] - 1, n, &Y[c * n],
                                                   &self.w1[0], &self.w2[0])

    cdef int big_size(self) noexcept:
        cdef int i, level, rows, size = 1
        for i in range(self.nterms):
            rows = 1
            for level in range(self.degrees[i] - 1):
                rows *= self.n
            size = max(size, rows)
        return size


def energies(tensors, degrees, amps, X):
    cdef const double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef int C = Xv.shape[0], n = Xv.shape[1], c
    cdef _Model model = _Model(tensors, degrees, amps, n)
    out = np.zeros(C)
    if C == 0:
        return out
    cdef double[::1] ov = out
    cdef double[:, ::1] Xc = np.array(Xv, dtype=np.float64, order="C")
    cdef double[::1] big = np.zeros(model.big_size() * C)
    model.energies(&Xc[0, 0], C, &big[0], &ov[0])
    return out


def run_chains(tensors, degrees, amps, double[:, ::1] X, double[::1] E,
               const double[::1] beta, const double[::1] step, const double[:, :, ::1] noise,
               const double[:, ::1] unif, double radius_sq, band_dir=None,
               double band_lo=-2.0, double band_hi=2.0):
    cdef int S = noise.shape[0], C = noise.shape[1], n = noise.shape[2]
    cdef _Model model = _Model(tensors, degrees, amps, n)
    cdef double R = sqrt(n * radius_sq)
    cdef double sqn = sqrt(<double>n)
    cdef double[:, ::1] Y = np.zeros((C, n))
    cdef double[::1] EY = np.zeros(C)
    cdef double[::1] big = np.zeros(model.big_size() * C)
    cdef unsigned char[::1] ok = np.zeros(C, dtype=np.uint8)
    cdef const double[::1] bd
    cdef bint use_band = band_dir is not None
    if use_band:
        bd = np.ascontiguousarray(band_dir, dtype=np.float64)
    acc_arr = np.zeros(C, dtype=np.int64)
    rej_arr = np.zeros(C, dtype=np.int64)
    cdef long long[::1] acc = acc_arr
    cdef long long[::1] rej = rej_arr
    cdef int s, c, i
    cdef double proj, nrm, t, de, h
    for s in range(S):
        # propose a tangent move for every chain, then evaluate all at once
        for c in range(C):
            proj = 0.0
            for i in range(n):
                proj += noise[s, c, i] * X[c, i]
            proj /= R
            nrm = 0.0
            h = step[c]
            for i in range(n):
                Y[c, i] = X[c, i] + h * (noise[s, c, i] - proj * X[c, i] / R)
                nrm += Y[c, i] * Y[c, i]
            nrm = R / sqrt(nrm)
            for i in range(n):
                Y[c, i] *= nrm
            ok[c] = 1
            if use_band:
                t = 0.0
                for i in range(n):
                    t += Y[c, i] * bd[i]
                t /= sqn
                if t < band_lo or t > band_hi:
                    rej[c] += 1
                    ok[c] = 0
        model.energies(&Y[0, 0], C, &big[0], &EY[0])
        for c in range(C):
            if not ok[c]:
                continue
            de = EY[c] - E[c]
            if de <= 0.0 or unif[s, c] < exp(-beta[c] * de):
                for i in range(n):
                    X[c, i] = Y[c, i]
                E[c] = EY[c]
                acc[c] += 1
    return acc_arr, rej_arr


def cs_functional(atoms, masses, dnu_values, double beta2):
    cdef double[::1] q = np.ascontiguousarray(atoms, dtype=np.float64)
    cdef double[::1] m = np.ascontiguousarray(masses, dtype=np.float64)
    cdef double[::1] nu = np.ascontiguousarray(dnu_values, dtype=np.float64)
    return _cs(q, m, nu, beta2)


cdef double _cs(double[::1] q, double[::1] m, double[::1] nu, double beta2):
    cdef int k = q.shape[0], j
    cdef double qk = q[k - 1]
    cdef double a = 0.0, b, d, z
    if qk >= 1.0:
        return INFINITY
    for j in range(k):
        a += m[j] * (nu[j + 1] - nu[j])
    cdef double[::1] X = np.empty(k + 1)
    X[k - 1] = 1.0 - qk
    for j in range(k - 2, -1, -1):
        X[j] = X[j + 1] + m[j] * (q[j + 1] - q[j])
    b = q[0] / X[0]
    for j in range(k - 1):
        d = q[j + 1] - q[j]
        if d <= 0.0:
            continue
        z = m[j] * d / X[j + 1]
        if z < 1e-8:
            b += d / X[j + 1] * (1.0 - 0.5 * z + z * z / 3.0)
        else:
            b += log1p(z) / m[j]
    return 0.5 * (beta2 * a + b + log(1.0 - qk))
