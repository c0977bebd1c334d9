from setuptools import setup, find_packages

setup(
    name='certmenu',
    version='0.1.0',
    description='Revenue- and welfare-optimal certification menus via non-linear pricing.',
    packages=find_packages(exclude=['tests']),
    py_modules=['solve'],
    python_requires='>=3.8',
    install_requires=[
        'numpy>=1.22',
        'numba>=0.56',
        'scipy>=1.8',
        'pandas>=1.4',
        'tqdm>=4.62',
    ],
    extras_require={'test': ['pytest>=7.0']},
)
