import numpy
from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    """Build the compiled kernels if possible; fall back to pure numpy."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, etc.
            print(f"building compiled kernels failed ({exc}); "
                  "podnn will use the pure-numpy backend")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"building {ext.name} failed ({exc}); "
                  "podnn will use the pure-numpy backend")


try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "podnn._kernels",
                ["src/podnn/_kernels.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions, cmdclass={"build_ext": optional_build_ext})
