# Compiled element kernels; signatures mirror numpy_backend exactly.

import numpy as np

cimport numpy as cnp

cnp.import_array()


def residual_cells(double[:, ::1] shape_q, double[:, :, :, ::1] grad_q,
                   double[:, ::1] wdet, double[:, ::1] kappa_q,
                   double alpha, double[:, ::1] u_e):
    cdef Py_ssize_t ne = grad_q.shape[0]
    cdef Py_ssize_t nq = grad_q.shape[1]
    cdef Py_ssize_t nen = grad_q.shape[2]
    out_arr = np.zeros((ne, nen), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t e, q, i, j
    cdef double uq, gux, guy, w, coeff
    for e in range(ne):
        for q in range(nq):
            uq = 0.0
            gux = 0.0
            guy = 0.0
            for i in range(nen):
                uq += shape_q[q, i] * u_e[e, i]
                gux += grad_q[e, q, i, 0] * u_e[e, i]
                guy += grad_q[e, q, i, 1] * u_e[e, i]
            w = wdet[e, q]
            coeff = w * alpha * uq * uq * uq
            for j in range(nen):
                out[e, j] += w * kappa_q[e, q] * (gux * grad_q[e, q, j, 0] + guy * grad_q[e, q, j, 1])
                out[e, j] += coeff * shape_q[q, j]
    return out_arr


def jacobian_cells(double[:, ::1] shape_q, double[:, :, :, ::1] grad_q,
                   double[:, ::1] wdet, double[:, ::1] kappa_q,
                   double alpha, double[:, ::1] u_e):
    cdef Py_ssize_t ne = grad_q.shape[0]
    cdef Py_ssize_t nq = grad_q.shape[1]
    cdef Py_ssize_t nen = grad_q.shape[2]
    out_arr = np.zeros((ne, nen, nen), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t e, q, i, j
    cdef double uq, wk, wr
    for e in range(ne):
        for q in range(nq):
            uq = 0.0
            for i in range(nen):
                uq += shape_q[q, i] * u_e[e, i]
            wk = wdet[e, q] * kappa_q[e, q]
            wr = wdet[e, q] * 3.0 * alpha * uq * uq
            for i in range(nen):
                for j in range(nen):
                    out[e, i, j] += wk * (grad_q[e, q, i, 0] * grad_q[e, q, j, 0]
                                          + grad_q[e, q, i, 1] * grad_q[e, q, j, 1])
                    out[e, i, j] += wr * shape_q[q, i] * shape_q[q, j]
    return out_arr


def second_derivative_cells(double[:, ::1] shape_q, double[:, ::1] wdet,
                            double alpha, double[:, ::1] u_e,
                            double[:, ::1] p_e, double[:, ::1] q_e):
    cdef Py_ssize_t ne = wdet.shape[0]
    cdef Py_ssize_t nq = wdet.shape[1]
    cdef Py_ssize_t nen = shape_q.shape[1]
    out_arr = np.zeros((ne, nen), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t e, q, i, j
    cdef double uq, pq, qq, coeff
    for e in range(ne):
        for q in range(nq):
            uq = 0.0
            pq = 0.0
            qq = 0.0
            for i in range(nen):
                uq += shape_q[q, i] * u_e[e, i]
                pq += shape_q[q, i] * p_e[e, i]
                qq += shape_q[q, i] * q_e[e, i]
            coeff = wdet[e, q] * 6.0 * alpha * uq * pq * qq
            for j in range(nen):
                out[e, j] += coeff * shape_q[q, j]
    return out_arr
