"""Build script for the optional compiled kernel backend.

The package is pure Python plus one Cython extension holding the numeric
hot loops (quaternion products, rigid-body derivatives, RK4 with Jacobian
propagation).  If the extension cannot be built the install still succeeds
and the package falls back to the numpy implementation of the same kernels.
"""

from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        ["src/dqnmpc/_kernels/_fastcore.pyx"],
        language_level=3,
        compiler_directives={
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "initializedcheck": False,
        },
    )
    for ext in ext_modules:
        ext.extra_compile_args = ["-O3"]
except Exception as exc:  # noqa: BLE001 - any build-chain failure means "no fast backend"
    print(f"warning: compiled kernels unavailable, using pure-python backend ({exc})")

setup(ext_modules=ext_modules)
