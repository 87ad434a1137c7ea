from setuptools import Extension, setup

setup(
    ext_modules=[
        Extension(
            "sparsesaga._atomics",
            sources=["src/sparsesaga/_atomics.c"],
        )
    ]
)
