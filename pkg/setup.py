from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python install; tunpd._kernel falls back
    ext_modules = []
else:
    ext_modules = cythonize(
        [Extension("tunpd._reduce", ["src/tunpd/_reduce.pyx"], extra_compile_args=["-O3"])],
        language_level=3,
    )

setup(ext_modules=ext_modules)
