"""
Parsing Module - Based on PLY

This module defines the grammar of the run configuration text: flat
'key = value' lines with '#' comments, where a value is a comma-separated
list of signed numbers, bare names or quoted strings.

Copyright 2020-2026, University Corporation for Atmospheric Research
LICENSE: See the LICENSE.rst file for details
"""

from collections import OrderedDict, namedtuple

from ply import lex, yacc

from pyenclose.errors import ConfigSyntaxError

tokens = ("UINT", "UFLOAT", "STRING", "NAME", "NEWLINE")
literals = ("=", ",", "+", "-")
t_ignore = " \t\r"
t_ignore_COMMENT = r"\#[^\n]*"

t_NAME = r"[a-zA-Z_][a-zA-Z0-9_.]*"


def t_UFLOAT(t):
    r"(([0-9]+\.[0-9]*|[0-9]*\.[0-9]+)([eE][+-]?[0-9]+)?|[0-9]+[eE][+-]?[0-9]+)"
    t.value = float(t.value)
    return t


def t_UINT(t):
    r"[0-9]+"
    t.value = int(t.value)
    return t


def t_STRING(t):
    r'"([^"\\\n]*(\\.[^"\\\n]*)*)"|\'([^\'\\\n]*(\\.[^\'\\\n]*)*)\''
    t.value = t.value[1:-1]
    return t


def t_NEWLINE(t):
    r"\n+"
    t.lexer.lineno += len(t.value)
    return t


def t_error(t):
    raise ConfigSyntaxError("Unexpected character {!r}".format(t.value[0]), lineno=t.lineno)


_LEXER_ = lex.lex(debug=False)


Assignment = namedtuple("Assignment", ["key", "values", "lineno"])


def p_config(p):
    """
    config : statements
    """
    p[0] = p[1]


def p_statements_append(p):
    """
    statements : statements statement
    """
    p[0] = p[1] + ([p[2]] if p[2] is not None else [])


def p_statements_empty(p):
    """
    statements :
    """
    p[0] = []


def p_statement_assignment(p):
    """
    statement : NAME '=' value_list NEWLINE
    """
    p[0] = Assignment(p[1], tuple(p[3]), p.lineno(1))


def p_statement_blank(p):
    """
    statement : NEWLINE
    """
    p[0] = None


def p_value_list_append(p):
    """
    value_list : value_list ',' value
    """
    p[0] = p[1] + [p[3]]


def p_value_list_single(p):
    """
    value_list : value
    """
    p[0] = [p[1]]


def p_value(p):
    """
    value : number
    value : NAME
    value : STRING
    """
    p[0] = p[1]


def p_number(p):
    """
    number : UFLOAT
    number : UINT
    number : '+' number
    """
    p[0] = p[1] if len(p) == 2 else p[2]


def p_number_negative(p):
    """
    number : '-' number
    """
    p[0] = -p[2]


def p_error(p):
    if p is None:
        raise ConfigSyntaxError("Unexpected end of input")
    if p.type == "NEWLINE":
        raise ConfigSyntaxError("Unexpected end of line", lineno=p.lineno)
    raise ConfigSyntaxError("Unexpected {!r}".format(p.value), lineno=p.lineno)


_PARSER_ = yacc.yacc(debug=False, write_tables=False)


def parse_assignments(text):
    """
    Parse configuration text into an ordered mapping of key -> Assignment

    Raises ConfigSyntaxError (with the line number) on malformed text and on
    keys assigned more than once.
    """
    if not text.endswith("\n"):
        text += "\n"
    lexer = _LEXER_.clone()
    lexer.lineno = 1
    statements = _PARSER_.parse(text, lexer=lexer)
    assignments = OrderedDict()
    for stmt in statements:
        if stmt.key in assignments:
            raise ConfigSyntaxError(
                "Key {!r} already set on line {}".format(stmt.key, assignments[stmt.key].lineno),
                lineno=stmt.lineno,
            )
        assignments[stmt.key] = stmt
    return assignments
