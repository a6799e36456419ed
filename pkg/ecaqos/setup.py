"""
ecaqos: slot-level simulation of EDCA and CSMA/ECA_QoS
"""


DISTNAME = "ecaqos"
DESCRIPTION = "Slotted WLAN MAC simulator for EDCA and CSMA/ECA_QoS"
AUTHOR = "ecaqos developers"
AUTHOR_EMAIL = ""
URL = ""
LICENSE = "MIT License"
DOWNLOAD_URL = ""


def parse_requirements_file(filename):
    with open(filename, encoding="utf-8") as fid:
        requires = [l.strip() for l in fid.readlines() if l.strip()]

    return requires


INSTALL_REQUIRES = [r for r in parse_requirements_file("requirements.txt") if not r.startswith("pytest")]
TESTS_REQUIRE = parse_requirements_file("requirements.txt")

with open("ecaqos/__init__.py") as fid:
    for line in fid:
        if line.startswith("__version__"):
            VERSION = line.strip().split()[-1][1:-1]
            break

with open("README.md") as fh:
    LONG_DESCRIPTION = fh.read()


if __name__ == "__main__":

    from setuptools import setup

    setup(
        name=DISTNAME,
        version=VERSION,
        license=LICENSE,
        description=DESCRIPTION,
        long_description=LONG_DESCRIPTION,
        long_description_content_type="text/markdown",
        author=AUTHOR,
        author_email=AUTHOR_EMAIL,
        url=URL,
        download_url=DOWNLOAD_URL,
        classifiers=[
            "Development Status :: 3 - Alpha",
            "Environment :: Console",
            "Intended Audience :: Science/Research",
            "License :: OSI Approved :: MIT License",
            "Programming Language :: Python",
            "Programming Language :: Python :: 3.10",
            "Topic :: System :: Networking",
            "Topic :: Scientific/Engineering",
            "Operating System :: OS Independent",
        ],
        install_requires=INSTALL_REQUIRES,
        tests_require=TESTS_REQUIRE,
        python_requires=">=3.10",
        packages=["ecaqos", "ecaqos.tests"],
        entry_points={"console_scripts": ["ecaqos=ecaqos.cli:main"]},
    )
