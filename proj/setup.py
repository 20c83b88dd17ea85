import os
import shutil
import subprocess
import sys
from pathlib import Path

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class CMakeExtension(Extension):
    def __init__(self, name):
        super().__init__(name, sources=[])
        self.sourcedir = str(Path(__file__).parent.resolve())


class CMakeBuild(build_ext):
    def build_extension(self, ext):
        build_dir = Path(self.build_temp).resolve()
        build_dir.mkdir(parents=True, exist_ok=True)

        cmake_args = [
            "-DCMAKE_BUILD_TYPE=Release",
            f"-DPython3_EXECUTABLE={sys.executable}",
        ]
        try:
            cmake_dir = subprocess.run(
                [sys.executable, "-m", "pybind11", "--cmakedir"],
                capture_output=True, text=True, check=True).stdout.strip()
            cmake_args.append(f"-Dpybind11_DIR={cmake_dir}")
        except (subprocess.CalledProcessError, FileNotFoundError):
            pass

        subprocess.run(["cmake", ext.sourcedir, *cmake_args],
                       cwd=build_dir, check=True)
        subprocess.run(
            ["cmake", "--build", ".", "--target", "_core",
             f"-j{os.cpu_count() or 2}"],
            cwd=build_dir, check=True)

        built = sorted((build_dir / "python" / "wapiti").glob("_core.*"))
        if not built:
            raise RuntimeError("cmake did not produce the _core module")
        ext_path = Path(self.get_ext_fullpath(ext.name)).resolve()
        ext_path.parent.mkdir(parents=True, exist_ok=True)
        shutil.copy2(built[-1], ext_path)


setup(
    ext_modules=[CMakeExtension("wapiti._core")],
    cmdclass={"build_ext": CMakeBuild},
)
