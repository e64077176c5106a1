import numpy
from Cython.Build import cythonize
from setuptools import Extension, setup

# The resampling inner loop is the only hot path; it is compiled with OpenMP.
# If the extension fails to build or import, omnimask._kernels falls back to
# the pure-numpy implementation at import time.
setup(
    ext_modules=cythonize(
        [
            Extension(
                "omnimask._kernels._resample",
                ["src/omnimask/_kernels/_resample.pyx"],
                extra_compile_args=["-O3", "-fopenmp", "-ffp-contract=off"],
                extra_link_args=["-fopenmp"],
                include_dirs=[numpy.get_include()],
            )
        ],
        language_level=3,
    )
)
