"""Kernel backend selection.

Imports the compiled `_fastcore` extension when available and falls back
to the pure-numpy `_slowcore` otherwise.  Setting the environment
variable ``DQNMPC_PURE_PY`` to a non-empty value forces the fallback
(useful for debugging and for benchmarking the two backends against
each other).  Both expose the same functions; `BACKEND` says which one
is live.
"""

from __future__ import annotations

import os

if os.environ.get("DQNMPC_PURE_PY"):
    from . import _slowcore as impl
else:
    try:
        from . import _fastcore as impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _slowcore as impl

BACKEND = impl.BACKEND

quat_mul = impl.quat_mul
quat_conj = impl.quat_conj
quat_canonical = impl.quat_canonical
quat_rotate_wb = impl.quat_rotate_wb
quat_rotate_bw = impl.quat_rotate_bw
quat_exp = impl.quat_exp
quat_log = impl.quat_log
dq_mul = impl.dq_mul
dq_conj = impl.dq_conj
dq_canonical = impl.dq_canonical
dq_from_pose = impl.dq_from_pose
dq_translation = impl.dq_translation
dq_normalize = impl.dq_normalize
dq_normalize_jac = impl.dq_normalize_jac
dq_log = impl.dq_log
dq_exp = impl.dq_exp
dq_error_ln_jac = impl.dq_error_ln_jac
dq_deriv = impl.dq_deriv
dq_rk4 = impl.dq_rk4
dq_rk4_jac = impl.dq_rk4_jac
cl_deriv = impl.cl_deriv
cl_rk4 = impl.cl_rk4
cl_rk4_jac = impl.cl_rk4_jac
cl_rollout = impl.cl_rollout
