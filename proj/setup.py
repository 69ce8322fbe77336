# SPDX-License-Identifier: Apache-2.0
"""Builds the native module for pip installs; the cmake build is primary."""

import glob

from pybind11.setup_helpers import Pybind11Extension, build_ext
from setuptools import setup

sources = sorted(p for p in glob.glob("src/*.cpp") if not p.endswith("main.cpp"))
sources.append("bindings/module.cpp")

setup(
    ext_modules=[
        Pybind11Extension(
            "dni._core",
            sources,
            include_dirs=["include", "vendor"],
            libraries=["z"],
            cxx_std=20,
            extra_compile_args=["-O3"],
        )
    ],
    cmdclass={"build_ext": build_ext},
)
