/* Coordinate-level atomic operations on shared float64 / int64 buffers.
 *
 * All operations act on single array cells through GCC/Clang __atomic
 * builtins, so concurrent updates from several threads never lose writes
 * even when the GIL is released.  Float adds use a compare-and-swap retry
 * loop on the 64-bit pattern of the cell; loads and stores are plain
 * sequentially-consistent atomic accesses.  Bulk variants (gather,
 * scatter_add, add_repeat) release the GIL so threads genuinely contend.
 */

#define PY_SSIZE_T_CLEAN
#include <Python.h>
#include <stdint.h>
#include <string.h>

static int
get_buffer(PyObject *obj, Py_buffer *view, int writable, const char *what)
{
    int flags = PyBUF_C_CONTIGUOUS | PyBUF_FORMAT;
    if (writable)
        flags |= PyBUF_WRITABLE;
    if (PyObject_GetBuffer(obj, view, flags) != 0)
        return -1;
    if (view->itemsize != 8) {
        PyBuffer_Release(view);
        PyErr_Format(PyExc_TypeError, "%s must have 8-byte items", what);
        return -1;
    }
    return 0;
}

static int
check_index(Py_buffer *view, Py_ssize_t i)
{
    if (i < 0 || i >= view->len / 8) {
        PyErr_SetString(PyExc_IndexError, "cell index out of range");
        return -1;
    }
    return 0;
}

static inline double
atomic_load_f64(const uint64_t *cell)
{
    uint64_t bits = __atomic_load_n(cell, __ATOMIC_SEQ_CST);
    double out;
    memcpy(&out, &bits, 8);
    return out;
}

static inline void
atomic_store_f64(uint64_t *cell, double value)
{
    uint64_t bits;
    memcpy(&bits, &value, 8);
    __atomic_store_n(cell, bits, __ATOMIC_SEQ_CST);
}

static inline void
atomic_add_f64(uint64_t *cell, double delta)
{
    uint64_t expected = __atomic_load_n(cell, __ATOMIC_SEQ_CST);
    for (;;) {
        double current;
        memcpy(&current, &expected, 8);
        double updated = current + delta;
        uint64_t desired;
        memcpy(&desired, &updated, 8);
        /* On failure __atomic_compare_exchange_n refreshes `expected`
           with the cell's current bits, so the loop retries lock-free. */
        if (__atomic_compare_exchange_n(cell, &expected, desired, 0,
                                        __ATOMIC_SEQ_CST, __ATOMIC_SEQ_CST))
            return;
    }
}

static PyObject *
py_load(PyObject *self, PyObject *args)
{
    PyObject *arr;
    Py_ssize_t i;
    if (!PyArg_ParseTuple(args, "On", &arr, &i))
        return NULL;
    Py_buffer view;
    if (get_buffer(arr, &view, 0, "array") != 0)
        return NULL;
    if (check_index(&view, i) != 0) {
        PyBuffer_Release(&view);
        return NULL;
    }
    double out = atomic_load_f64((uint64_t *)view.buf + i);
    PyBuffer_Release(&view);
    return PyFloat_FromDouble(out);
}

static PyObject *
py_store(PyObject *self, PyObject *args)
{
    PyObject *arr;
    Py_ssize_t i;
    double value;
    if (!PyArg_ParseTuple(args, "Ond", &arr, &i, &value))
        return NULL;
    Py_buffer view;
    if (get_buffer(arr, &view, 1, "array") != 0)
        return NULL;
    if (check_index(&view, i) != 0) {
        PyBuffer_Release(&view);
        return NULL;
    }
    atomic_store_f64((uint64_t *)view.buf + i, value);
    PyBuffer_Release(&view);
    Py_RETURN_NONE;
}

static PyObject *
py_add(PyObject *self, PyObject *args)
{
    PyObject *arr;
    Py_ssize_t i;
    double delta;
    if (!PyArg_ParseTuple(args, "Ond", &arr, &i, &delta))
        return NULL;
    Py_buffer view;
    if (get_buffer(arr, &view, 1, "array") != 0)
        return NULL;
    if (check_index(&view, i) != 0) {
        PyBuffer_Release(&view);
        return NULL;
    }
    atomic_add_f64((uint64_t *)view.buf + i, delta);
    PyBuffer_Release(&view);
    Py_RETURN_NONE;
}

static PyObject *
py_add_repeat(PyObject *self, PyObject *args)
{
    PyObject *arr;
    Py_ssize_t i, count;
    double delta;
    if (!PyArg_ParseTuple(args, "Ondn", &arr, &i, &delta, &count))
        return NULL;
    Py_buffer view;
    if (get_buffer(arr, &view, 1, "array") != 0)
        return NULL;
    if (check_index(&view, i) != 0) {
        PyBuffer_Release(&view);
        return NULL;
    }
    uint64_t *cell = (uint64_t *)view.buf + i;
    Py_BEGIN_ALLOW_THREADS
    for (Py_ssize_t k = 0; k < count; k++)
        atomic_add_f64(cell, delta);
    Py_END_ALLOW_THREADS
    PyBuffer_Release(&view);
    Py_RETURN_NONE;
}

/* Coordinate-wise atomic loads of arr[idx[k]] into out[k].  The result is
 * an inconsistent snapshot: each cell is read atomically, the vector as a
 * whole is not. */
static PyObject *
py_gather(PyObject *self, PyObject *args)
{
    PyObject *arr, *idx, *out;
    if (!PyArg_ParseTuple(args, "OOO", &arr, &idx, &out))
        return NULL;
    Py_buffer aview, iview, oview;
    if (get_buffer(arr, &aview, 0, "array") != 0)
        return NULL;
    if (get_buffer(idx, &iview, 0, "index array") != 0) {
        PyBuffer_Release(&aview);
        return NULL;
    }
    if (get_buffer(out, &oview, 1, "output array") != 0) {
        PyBuffer_Release(&aview);
        PyBuffer_Release(&iview);
        return NULL;
    }
    Py_ssize_t m = iview.len / 8;
    Py_ssize_t n = aview.len / 8;
    const int64_t *ix = (const int64_t *)iview.buf;
    int bad = oview.len / 8 < m;
    for (Py_ssize_t k = 0; k < m && !bad; k++)
        if (ix[k] < 0 || ix[k] >= n)
            bad = 1;
    if (bad) {
        PyErr_SetString(PyExc_IndexError, "gather index out of range");
        goto done_err;
    }
    {
        const uint64_t *src = (const uint64_t *)aview.buf;
        double *dst = (double *)oview.buf;
        Py_BEGIN_ALLOW_THREADS
        for (Py_ssize_t k = 0; k < m; k++)
            dst[k] = atomic_load_f64(src + ix[k]);
        Py_END_ALLOW_THREADS
    }
    PyBuffer_Release(&aview);
    PyBuffer_Release(&iview);
    PyBuffer_Release(&oview);
    Py_RETURN_NONE;
done_err:
    PyBuffer_Release(&aview);
    PyBuffer_Release(&iview);
    PyBuffer_Release(&oview);
    return NULL;
}

/* arr[idx[k]] += delta[k], each coordinate via an independent CAS loop. */
static PyObject *
py_scatter_add(PyObject *self, PyObject *args)
{
    PyObject *arr, *idx, *delta;
    if (!PyArg_ParseTuple(args, "OOO", &arr, &idx, &delta))
        return NULL;
    Py_buffer aview, iview, dview;
    if (get_buffer(arr, &aview, 1, "array") != 0)
        return NULL;
    if (get_buffer(idx, &iview, 0, "index array") != 0) {
        PyBuffer_Release(&aview);
        return NULL;
    }
    if (get_buffer(delta, &dview, 0, "delta array") != 0) {
        PyBuffer_Release(&aview);
        PyBuffer_Release(&iview);
        return NULL;
    }
    Py_ssize_t m = iview.len / 8;
    Py_ssize_t n = aview.len / 8;
    const int64_t *ix = (const int64_t *)iview.buf;
    int bad = dview.len / 8 < m;
    for (Py_ssize_t k = 0; k < m && !bad; k++)
        if (ix[k] < 0 || ix[k] >= n)
            bad = 1;
    if (bad) {
        PyErr_SetString(PyExc_IndexError, "scatter index out of range");
        goto done_err;
    }
    {
        uint64_t *dst = (uint64_t *)aview.buf;
        const double *d = (const double *)dview.buf;
        Py_BEGIN_ALLOW_THREADS
        for (Py_ssize_t k = 0; k < m; k++)
            atomic_add_f64(dst + ix[k], d[k]);
        Py_END_ALLOW_THREADS
    }
    PyBuffer_Release(&aview);
    PyBuffer_Release(&iview);
    PyBuffer_Release(&dview);
    Py_RETURN_NONE;
done_err:
    PyBuffer_Release(&aview);
    PyBuffer_Release(&iview);
    PyBuffer_Release(&dview);
    return NULL;
}

static PyObject *
py_exchange(PyObject *self, PyObject *args)
{
    PyObject *arr;
    Py_ssize_t i;
    double value;
    if (!PyArg_ParseTuple(args, "Ond", &arr, &i, &value))
        return NULL;
    Py_buffer view;
    if (get_buffer(arr, &view, 1, "array") != 0)
        return NULL;
    if (check_index(&view, i) != 0) {
        PyBuffer_Release(&view);
        return NULL;
    }
    uint64_t bits;
    memcpy(&bits, &value, 8);
    uint64_t old = __atomic_exchange_n((uint64_t *)view.buf + i, bits,
                                       __ATOMIC_SEQ_CST);
    PyBuffer_Release(&view);
    double out;
    memcpy(&out, &old, 8);
    return PyFloat_FromDouble(out);
}

static PyObject *
py_fetch_add_i64(PyObject *self, PyObject *args)
{
    PyObject *arr;
    Py_ssize_t i;
    long long delta;
    if (!PyArg_ParseTuple(args, "OnL", &arr, &i, &delta))
        return NULL;
    Py_buffer view;
    if (get_buffer(arr, &view, 1, "array") != 0)
        return NULL;
    if (check_index(&view, i) != 0) {
        PyBuffer_Release(&view);
        return NULL;
    }
    int64_t old = __atomic_fetch_add((int64_t *)view.buf + i, (int64_t)delta,
                                     __ATOMIC_SEQ_CST);
    PyBuffer_Release(&view);
    return PyLong_FromLongLong((long long)old);
}

static PyMethodDef methods[] = {
    {"load", py_load, METH_VARARGS,
     "load(arr, i) -> float: atomic load of a float64 cell."},
    {"store", py_store, METH_VARARGS,
     "store(arr, i, value): atomic store into a float64 cell."},
    {"add", py_add, METH_VARARGS,
     "add(arr, i, delta): atomic add via a compare-and-swap retry loop."},
    {"add_repeat", py_add_repeat, METH_VARARGS,
     "add_repeat(arr, i, delta, count): `count` atomic adds, GIL released."},
    {"gather", py_gather, METH_VARARGS,
     "gather(arr, idx, out): coordinate-wise atomic loads (inconsistent read)."},
    {"scatter_add", py_scatter_add, METH_VARARGS,
     "scatter_add(arr, idx, delta): coordinate-wise atomic adds."},
    {"exchange", py_exchange, METH_VARARGS,
     "exchange(arr, i, value) -> old: atomic swap of a float64 cell."},
    {"fetch_add_i64", py_fetch_add_i64, METH_VARARGS,
     "fetch_add_i64(arr, i, delta) -> old: atomic fetch-add on an int64 cell."},
    {NULL, NULL, 0, NULL},
};

static struct PyModuleDef module = {
    PyModuleDef_HEAD_INIT, "_atomics",
    "Lock-free atomic cell operations for shared numpy buffers.", -1, methods,
};

PyMODINIT_FUNC
PyInit__atomics(void)
{
    return PyModule_Create(&module);
}
