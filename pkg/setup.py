import os
import shutil

import numpy
from Cython.Build import cythonize
from setuptools import Extension, setup

# clang vectorizes the splat kernel far better than gcc 11; either works.
if "CC" not in os.environ and shutil.which("clang"):
    os.environ["CC"] = "clang"

# -ffp-contract=off keeps the C arithmetic bit-identical to the numpy
# fallback (no FMA contraction); golden outputs rely on that.
extensions = [
    Extension(
        "splatstyle.render._kernel",
        ["src/splatstyle/render/_kernel.pyx"],
        include_dirs=[numpy.get_include()],
        extra_compile_args=["-O3", "-march=native", "-ffp-contract=off", "-fno-math-errno"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
]

setup(
    ext_modules=cythonize(
        extensions,
        compiler_directives={"language_level": "3"},
    )
)
