from setuptools import setup

setup(
    name="manifold-kinetics",
    packages=["manifold_kinetics"],
    version="0.1.0",
    description="Diffusion-map reduction of stiff kinetics onto their slow attracting manifold.",
    license="Protected",
    install_requires=["numpy",  # dense linear algebra on point clouds and kernels
                      "scipy",  # symmetric eigensolver, spanning trees, factorizations and interpolation
                      "pendulum",  # handle run timestamps and wall-clock durations with ease
                      "dacite",  # convert dictionaries to dataclass instances
                      "orjson",  # fast(est) JSON encoder and decoder
                      ],
    entry_points={"console_scripts": ["manifold-kinetics=manifold_kinetics.cli:main"]},
    classifiers=[],
    include_package_data=True,
    platforms="any",
)
