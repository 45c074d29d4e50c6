# Sphinx configuration for the PyEnclose documentation.
#
# The version is read from setup.cfg so that bumpversion keeps it current.

import configparser
import os
import sys

sys.path.insert(0, os.path.abspath('../..'))

cfg = configparser.ConfigParser()
cfg.read('../../setup.cfg')
__version__ = cfg['bumpversion']['current_version']

extensions = ['sphinx.ext.autodoc',
              'sphinx.ext.mathjax',
              'sphinx.ext.viewcode',
              'sphinx.ext.napoleon']

# autodoc renders the 'Parameters:' blocks of the docstrings through napoleon
autodoc_member_order = 'bysource'
napoleon_google_docstring = True

source_suffix = '.rst'
master_doc = 'index'

project = u'PyEnclose'
copyright = u'2020-2026, University Corporation for Atmospheric Research'
author = u'University Corporation for Atmospheric Research'

version = '.'.join(__version__.split('.')[:-1])
release = __version__

exclude_patterns = ['_build']
pygments_style = 'sphinx'

html_theme = 'sphinx_rtd_theme'
htmlhelp_basename = 'PyEnclosedoc'

man_pages = [
    (master_doc, 'enclose', u'PyEnclose Documentation', [author], 1)
]
