"""Build hook for the optional compiled kernels.

If Cython or a C compiler is missing the package still installs and the
numpy fallback in ``adaptlayer._pykernels`` is used at runtime.
"""

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "adaptlayer._ckernels",
                ["src/adaptlayer/_ckernels.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": 3},
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
