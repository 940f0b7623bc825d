import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("AMT_LAB_PURE_PYTHON"):
    try:
        from Cython.Build import cythonize
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [Extension("amt_lab.oracle._ckernel", ["src/amt_lab/oracle/_ckernel.pyx"])],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
