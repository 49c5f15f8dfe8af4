from setuptools import Extension, setup

try:
    import numpy as np
    from Cython.Build import cythonize
except ImportError:
    # no build toolchain: the package falls back to pure Python at import
    ext_modules = []
else:
    ext_modules = cythonize(
        [Extension("eacausal._kernels", ["src/eacausal/_kernels.pyx"],
                   include_dirs=[np.get_include()],
                   extra_compile_args=["-O3"], optional=True)],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
