from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python install
    ext_modules = []
else:
    ext_modules = cythonize(
        [Extension("ogsched._kernels", ["src/ogsched/_kernels.pyx"])],
        language_level=3,
    )

setup(ext_modules=ext_modules)
