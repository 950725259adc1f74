import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "qtmlab.kernels._cykernels",
                ["src/qtmlab/kernels/_cykernels.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )

# the package falls back to the numpy kernels when the extension is missing,
# so a failed compile should not abort the install
for ext in ext_modules:
    ext.optional = True

setup(ext_modules=ext_modules)
