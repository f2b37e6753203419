from setuptools import setup

with open('RECODE/VERSION.dat') as version_file:
      __version__ = version_file.read().strip()

setup(name='RECODE',
      version=__version__,
      description='Respiration forecasting with Dynamic mode decomposition and control',
      long_description=open("README.md").read(),
      long_description_content_type='text/markdown',
      license='MIT',
      packages=['RECODE'],
      package_data={'RECODE': ['VERSION.dat']},
      python_requires='>=3.10',
      install_requires=['numpy', 'scipy', 'pandas', 'tqdm'],
      extras_require={'test': ['pytest'], 'docs': ['sphinx']},
      entry_points={'console_scripts': ['recode=RECODE.cli:main']},
      )
