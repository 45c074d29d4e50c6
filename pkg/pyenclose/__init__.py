"""
PyEnclose

A package for enclosing solutions of singular quasilinear Neumann systems
between certified sub- and supersolutions

:COPYRIGHT: 2020-2026, University Corporation for Atmospheric Research
:LICENSE: See the LICENSE.rst file for details
"""
