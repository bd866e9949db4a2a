"""Raw-memory primitives usable from nopython code.

Addresses are plain int64 values; 0 is the null address.  All symbols are
resolved by name at JIT link time, so functions built on these stay cacheable.
"""
from contextlib import contextmanager

import numba
import numpy as np
from llvmlite import ir
from numba import njit, types
from numba.core import cgutils
from numba.extending import intrinsic

_i64 = ir.IntType(64)


def _libc(builder, name, ret, args):
    fnty = ir.FunctionType(ret, args)
    return cgutils.get_or_insert_function(builder.module, fnty, name)


@intrinsic
def sys_malloc(typingctx, nbytes):
    sig = types.int64(types.int64)

    def codegen(context, builder, sig, args):
        fn = _libc(builder, "malloc", cgutils.voidptr_t, [_i64])
        return builder.ptrtoint(builder.call(fn, [args[0]]), _i64)

    return sig, codegen


@intrinsic
def sys_free(typingctx, addr):
    sig = types.void(types.int64)

    def codegen(context, builder, sig, args):
        fn = _libc(builder, "free", ir.VoidType(), [cgutils.voidptr_t])
        builder.call(fn, [builder.inttoptr(args[0], cgutils.voidptr_t)])
        return context.get_dummy_value()

    return sig, codegen


@intrinsic
def mem_copy(typingctx, dst, src, nbytes):
    sig = types.void(types.int64, types.int64, types.int64)

    def codegen(context, builder, sig, args):
        fn = _libc(builder, "memmove", cgutils.voidptr_t,
                   [cgutils.voidptr_t, cgutils.voidptr_t, _i64])
        d = builder.inttoptr(args[0], cgutils.voidptr_t)
        s = builder.inttoptr(args[1], cgutils.voidptr_t)
        builder.call(fn, [d, s, args[2]])
        return context.get_dummy_value()

    return sig, codegen


@intrinsic
def address_as_voidptr(typingctx, addr):
    sig = types.voidptr(types.int64)

    def codegen(context, builder, sig, args):
        return builder.inttoptr(args[0], cgutils.voidptr_t)

    return sig, codegen


@intrinsic
def load_word(typingctx, addr):
    sig = types.int64(types.int64)

    def codegen(context, builder, sig, args):
        ptr = builder.inttoptr(args[0], _i64.as_pointer())
        return builder.load(ptr)

    return sig, codegen


@intrinsic
def store_word(typingctx, addr, value):
    sig = types.void(types.int64, types.int64)

    def codegen(context, builder, sig, args):
        ptr = builder.inttoptr(args[0], _i64.as_pointer())
        builder.store(args[1], ptr)
        return context.get_dummy_value()

    return sig, codegen


def _atomic_rmw(op):
    @intrinsic
    def impl(typingctx, arr, idx, val):
        if not isinstance(arr, types.Array) or not isinstance(arr.dtype, types.Integer):
            return None
        sig = arr.dtype(arr, types.intp, arr.dtype)

        def codegen(context, builder, sig, args):
            aryty = sig.args[0]
            ary = context.make_array(aryty)(context, builder, args[0])
            ptr = cgutils.get_item_pointer(context, builder, aryty, ary, [args[1]])
            return builder.atomic_rmw(op, ptr, args[2], "monotonic")

        return sig, codegen

    return impl


@intrinsic
def f32_bits(typingctx, x):
    """Bit pattern of ``x`` rounded to float32."""
    if not isinstance(x, types.Float):
        return None
    sig = types.uint32(x)

    def codegen(context, builder, sig, args):
        val = args[0]
        if sig.args[0] != types.float32:
            val = builder.fptrunc(val, ir.FloatType())
        return builder.bitcast(val, ir.IntType(32))

    return sig, codegen


@intrinsic
def bits_f32(typingctx, x):
    if not isinstance(x, types.Integer):
        return None
    sig = types.float32(x)

    def codegen(context, builder, sig, args):
        val = builder.trunc(args[0], ir.IntType(32)) if sig.args[0].bitwidth > 32 else args[0]
        return builder.bitcast(val, ir.FloatType())

    return sig, codegen


# Both return the previous value.  Only pass arrays that arrive as function
# arguments: parfors may constant-fold a locally created array around them.
atomic_add = _atomic_rmw("add")
atomic_or = _atomic_rmw("or")


@njit(cache=True)
def word_view(addr, nwords):
    """uint32 view over ``nwords`` 4-byte words starting at ``addr``."""
    return numba.carray(address_as_voidptr(addr), nwords, np.uint32)


@njit(cache=True)
def edge_view(addr, nedges):
    """uint64 view over ``nedges`` packed (target, weight) edges at ``addr``."""
    return numba.carray(address_as_voidptr(addr), nedges, np.uint64)


@njit(cache=True)
def thread_id():
    return numba.get_thread_id()


def aligned_zeros(shape, dtype=np.int64, align=64):
    """Zeroed array whose first element sits on an ``align``-byte boundary."""
    dtype = np.dtype(dtype)
    count = int(np.prod(shape))
    extra = align // dtype.itemsize
    buf = np.zeros(count + extra, dtype=dtype)
    skip = (-buf.ctypes.data % align) // dtype.itemsize
    return buf[skip:skip + count].reshape(shape)


@contextmanager
def using_threads(n=None):
    """Run the body with numba's active thread count set to ``n``."""
    prev = numba.get_num_threads()
    if n is None:
        yield prev
        return
    numba.set_num_threads(n)
    try:
        yield n
    finally:
        numba.set_num_threads(prev)
