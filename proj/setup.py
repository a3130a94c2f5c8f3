import os
import subprocess
from pathlib import Path

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class CMakeExtension(Extension):
    def __init__(self, name):
        super().__init__(name, sources=[])


class CMakeBuild(build_ext):
    """Drives the CMake build and drops the extension where setuptools expects it."""

    def build_extension(self, ext):
        out_path = Path(self.get_ext_fullpath(ext.name)).resolve()
        out_path.parent.mkdir(parents=True, exist_ok=True)
        source_dir = Path(__file__).resolve().parent
        build_dir = Path(self.build_temp).resolve()
        build_dir.mkdir(parents=True, exist_ok=True)
        subprocess.run(
            [
                "cmake",
                "-S",
                str(source_dir),
                "-B",
                str(build_dir),
                "-DCMAKE_BUILD_TYPE=Release",
                "-DFACEPASTE_BUILD_PYTHON=ON",
            ],
            check=True,
        )
        subprocess.run(
            [
                "cmake",
                "--build",
                str(build_dir),
                "--target",
                "facepaste_pybind",
                "--parallel",
                str(os.cpu_count() or 2),
            ],
            check=True,
        )
        built = next(build_dir.glob("_core*.so"))
        self.copy_file(str(built), str(out_path))


setup(
    ext_modules=[CMakeExtension("facepaste._core")],
    cmdclass={"build_ext": CMakeBuild},
)
