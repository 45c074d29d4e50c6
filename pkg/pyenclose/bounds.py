"""
Sub- and Supersolution Barriers

This module builds the four explicit barrier recipes (T1, T3, T5, T9) from
the auxiliary eigen and torsion fields, chooses the scaling Lambda, and
certifies a barrier pair discretely: ordering, boundary normal signs, the
sub/super inequalities with endpoint-realized coupling, the growth bound and
the positivity constant.

Copyright 2020-2026, University Corporation for Atmospheric Research
LICENSE: See the LICENSE.rst file for details
"""

from collections import OrderedDict, namedtuple

import numpy

from pyenclose.errors import CertificateError, ConfigurationError, RecipeMismatchError
from pyenclose.exponents import failed_checks, validate_exponents
from pyenclose.fields import TOL_ORDER, Comparison, ScalarField, field_leq, normal_differences
from pyenclose.plap import DIRICHLET, NEUMANN, get_stencil, nodal_residual
from pyenclose.spectral import (
    EigenPair,
    first_eigenpair_dirichlet,
    first_eigenpair_neumann,
    singular_torsion,
    torsion,
)

T1 = "T1"
T3 = "T3"
T5 = "T5"
T9 = "T9"
RECIPES = (T1, T3, T5, T9)

# Recipes whose lower fields stay away from zero
POSITIVE_RECIPES = (T1, T3)

MAX_DOUBLINGS = 60


class SubSupPair(
    namedtuple(
        "SubSupPair",
        ["u_lower", "v_lower", "u_upper", "v_upper", "recipe", "lam", "aux", "meta"],
    )
):
    """
    An ordered barrier quadruple with its construction metadata

    Parameters:
        u_lower, v_lower, u_upper, v_upper (ScalarField): The barrier fields
        recipe (str): One of 'T1', 'T3', 'T5', 'T9' (or 'custom')
        lam (float): The scaling Lambda
        aux (dict): The auxiliary eigenpairs and torsion results used
        meta (dict): Recipe certificates (rho or c, floors, boundary signs)
    """

    __slots__ = ()

    @property
    def grid(self):
        return self.u_lower.grid

    def fields(self):
        return OrderedDict(
            [
                ("u_lower", self.u_lower),
                ("v_lower", self.v_lower),
                ("u_upper", self.u_upper),
                ("v_upper", self.v_upper),
            ]
        )

    def todict(self):
        return {"recipe": self.recipe, "lambda": self.lam, "meta": dict(self.meta)}


def _comparison_dict_(comp):
    return {
        "passed": bool(comp.passed),
        "margin": float(comp.margin),
        "node": comp.node,
        "coordinates": list(comp.coordinates) if comp.coordinates is not None else None,
    }


class HypothesisCertificate(
    namedtuple(
        "HypothesisCertificate",
        ["ordering", "normal_signs", "sub_margins", "super_margins", "growth", "positivity",
         "tol", "passed"],
    )
):
    """
    Discrete certificate of the barrier hypotheses of a SubSupPair

    The comparison entries are Comparison records (pass flag, worst margin,
    worst node, coordinates); 'growth' and 'positivity' are dicts with a
    'passed' entry.  The overall flag passes iff every component passes.
    """

    __slots__ = ()

    def failures(self):
        """Labels of the failing components"""
        failed = []
        for label, group in (
            ("ordering", self.ordering),
            ("normal", self.normal_signs),
            ("sub", self.sub_margins),
            ("super", self.super_margins),
        ):
            failed.extend("{}:{}".format(label, k) for k, c in group.items() if not c.passed)
        if not self.growth["passed"]:
            failed.append("growth:{}".format(self.growth["kind"]))
        if not self.positivity["passed"]:
            failed.append("positivity:{}".format(self.positivity["kind"]))
        return failed

    def todict(self):
        def _group_(group):
            return OrderedDict((k, _comparison_dict_(c)) for k, c in group.items())

        return OrderedDict(
            [
                ("passed", bool(self.passed)),
                ("tol", self.tol),
                ("ordering", _group_(self.ordering)),
                ("normal_signs", _group_(self.normal_signs)),
                ("sub_margins", _group_(self.sub_margins)),
                ("super_margins", _group_(self.super_margins)),
                ("growth", dict(self.growth)),
                ("positivity", dict(self.positivity)),
                ("failures", self.failures()),
            ]
        )


def check_recipe(e, recipe, ndim=None):
    """
    Raise if the exponents do not fit the recipe

    Every recipe needs the exponent regime; T5 needs alpha2, beta1 > 0 and
    T9 needs max{-1, -(p2-1)} < alpha2 < 0 and max{-1, -(p1-1)} < beta1 < 0.
    """
    if recipe not in RECIPES:
        raise ConfigurationError("Unknown recipe {!r}; choose from {}".format(recipe, RECIPES))
    report = validate_exponents(e, ndim)
    if not report.valid:
        raise ConfigurationError(
            "Exponent regime violated: {}".format(", ".join(failed_checks(report)))
        )
    if recipe == T5 and not (e.alpha2 > 0 and e.beta1 > 0):
        raise RecipeMismatchError(
            "Recipe T5 needs alpha2 > 0 and beta1 > 0 (got alpha2 = {}, beta1 = {})".format(
                e.alpha2, e.beta1
            )
        )
    if recipe == T9:
        if not (max(-1.0, -(e.p2 - 1)) < e.alpha2 < 0 and max(-1.0, -(e.p1 - 1)) < e.beta1 < 0):
            raise RecipeMismatchError(
                "Recipe T9 needs max(-1, 1 - p2) < alpha2 < 0 and max(-1, 1 - p1) < beta1 < 0 "
                "(got alpha2 = {}, beta1 = {})".format(e.alpha2, e.beta1)
            )


def build_auxiliary(grid, e, recipe, cfg=None, initial=None):
    """
    Compute the auxiliary eigenpairs and torsion results a recipe needs

    Parameters:
        grid (Grid): The grid
        e (ExponentSet): The exponents
        recipe (str): The barrier recipe
        cfg (ScalarSolveConfig): Scalar solver settings
        initial: Optional starting field of the Dirichlet eigen iteration

    Returns:
        OrderedDict of name -> EigenPair or ScalarSolveResult, with names
        phi_hat1/2, y_hat1/2, y1/2, phi1/2, z_hat1/2 as needed
    """
    check_recipe(e, recipe, grid.ndim)
    cache = {}

    def _compute_(key, func, *args):
        if key not in cache:
            cache[key] = func(*args)
        return cache[key]

    aux = OrderedDict()
    for i, p in ((1, e.p1), (2, e.p2)):
        if recipe in (T1, T3):
            aux["phi_hat{}".format(i)] = first_eigenpair_neumann(grid, p)
        if recipe in (T1, T5):
            aux["y_hat{}".format(i)] = _compute_(("y_hat", p), torsion, grid, p, NEUMANN, cfg)
        if recipe == T3:
            aux["y{}".format(i)] = _compute_(("y", p), torsion, grid, p, DIRICHLET, cfg)
        if recipe in (T5, T9):
            aux["phi{}".format(i)] = _compute_(
                ("phi", p), first_eigenpair_dirichlet, grid, p, cfg, initial
            )
    if recipe == T9:
        aux["z_hat1"] = _compute_(("z", e.p1, e.beta1), singular_torsion, grid, e.p1, e.beta1, cfg)
        aux["z_hat2"] = _compute_(
            ("z", e.p2, e.alpha2), singular_torsion, grid, e.p2, e.alpha2, cfg
        )
    return aux


def aux_field(aux, name):
    """
    The field of an auxiliary object (eigenfunction or solution)
    """
    if name not in aux:
        raise ConfigurationError("Auxiliary object {!r} is missing".format(name))
    obj = aux[name]
    if isinstance(obj, EigenPair):
        return obj.eigenfunction
    return obj.solution


def _t3_conditions_(lam, p, phi_sup, y_sup):
    return (
        lam - phi_sup > lam / 2
        and lam - y_sup > lam / 2
        and (lam / 2) ** (p - 1) - (lam / 3) ** (p - 1) > 1
    )


def _per_equation_(value):
    if numpy.isscalar(value):
        return (float(value), float(value))
    return tuple(float(v) for v in value)


def lambda_floor_T3(e, phi_hat_sup, y_sup):
    """
    Smallest admissible Lambda of the T3 recipe

    Parameters:
        e (ExponentSet): The exponents
        phi_hat_sup: Sup of the Neumann eigenfunction, per equation (or one value)
        y_sup: Sup of the Dirichlet torsion, per equation (or one value)

    Returns:
        max_i 2 (1 + 3 / (3^(p_i-1) - 2^(p_i-1))^(1/(p_i-1)) + phi_hat_sup_i + y_sup_i),
        doubled until Lambda - sup > Lambda/2 for both sups and
        (Lambda/2)^(p_i-1) - (Lambda/3)^(p_i-1) > 1 hold for i = 1, 2
    """
    phi_sups = _per_equation_(phi_hat_sup)
    y_sups = _per_equation_(y_sup)
    if min(phi_sups + y_sups) <= 0:
        raise ConfigurationError("Sup-norms must be positive")
    ps = (e.p1, e.p2)
    lam = max(
        2 * (1 + 3 / (3 ** (p - 1) - 2 ** (p - 1)) ** (1 / (p - 1)) + phs + ys)
        for p, phs, ys in zip(ps, phi_sups, y_sups)
    )
    while not all(_t3_conditions_(lam, p, phs, ys) for p, phs, ys in zip(ps, phi_sups, y_sups)):
        lam *= 2
    return lam


def _check_lambda_(lam):
    if not lam > 1:
        raise ConfigurationError("Lambda must exceed 1, got {}".format(lam))
    return float(lam)


def construct_T1(grid, e, lam, aux):
    """
    T1 pair (phi_hat1 / L, phi_hat2 / L; L y_hat1, L y_hat2)
    """
    check_recipe(e, T1, grid.ndim)
    lam = _check_lambda_(lam)
    u_lower = (aux_field(aux, "phi_hat1") / lam).rename("u_lower")
    v_lower = (aux_field(aux, "phi_hat2") / lam).rename("v_lower")
    u_upper = (lam * aux_field(aux, "y_hat1")).rename("u_upper")
    v_upper = (lam * aux_field(aux, "y_hat2")).rename("v_upper")
    meta = {"rho": min(u_lower.min(), v_lower.min())}
    return SubSupPair(u_lower, v_lower, u_upper, v_upper, T1, lam, aux, meta)


def construct_T3(grid, e, lam, aux, enforce_floor=True, tol=TOL_ORDER):
    """
    T3 pair ((L - phi_hat1) / L, (L - phi_hat2) / L; L (L - y1), L (L - y2))

    Parameters:
        enforce_floor (bool): Whether Lambda below 'lambda_floor_T3' is an error
    """
    check_recipe(e, T3, grid.ndim)
    lam = _check_lambda_(lam)
    phi_hat1, phi_hat2 = aux_field(aux, "phi_hat1"), aux_field(aux, "phi_hat2")
    y1, y2 = aux_field(aux, "y1"), aux_field(aux, "y2")
    floor = lambda_floor_T3(e, (phi_hat1.max(), phi_hat2.max()), (y1.max(), y2.max()))
    if enforce_floor and lam < floor * (1 - 1e-12):
        raise ConfigurationError(
            "Lambda = {} is below the T3 floor {}".format(lam, floor)
        )
    u_lower = ((lam - phi_hat1) / lam).rename("u_lower")
    v_lower = ((lam - phi_hat2) / lam).rename("v_lower")
    u_upper = (lam * (lam - y1)).rename("u_upper")
    v_upper = (lam * (lam - y2)).rename("v_upper")
    meta = {"rho": min(u_lower.min(), v_lower.min())}
    meta["floor"] = floor
    meta["lower_normal_zero"] = bool(
        max(numpy.max(numpy.abs(normal_differences(f))) for f in (u_lower, v_lower)) <= tol
    )
    meta["upper_normal_positive"] = bool(
        min(numpy.min(normal_differences(f)) for f in (u_upper, v_upper)) > 0
    )
    return SubSupPair(u_lower, v_lower, u_upper, v_upper, T3, lam, aux, meta)


def construct_T5(grid, e, lam, aux):
    """
    T5 pair (phi1 / L, phi2 / L; L y_hat1, L y_hat2) with Dirichlet eigenfunctions phi_i
    """
    check_recipe(e, T5, grid.ndim)
    lam = _check_lambda_(lam)
    u_lower = (aux_field(aux, "phi1") / lam).rename("u_lower")
    v_lower = (aux_field(aux, "phi2") / lam).rename("v_lower")
    u_upper = (lam * aux_field(aux, "y_hat1")).rename("u_upper")
    v_upper = (lam * aux_field(aux, "y_hat2")).rename("v_upper")
    meta = {"c": min(aux["phi1"].c0, aux["phi2"].c0) / lam}
    return SubSupPair(u_lower, v_lower, u_upper, v_upper, T5, lam, aux, meta)


def construct_T9(grid, e, lam, aux):
    """
    T9 pair (phi1 / L, phi2 / L; L z_hat1, L z_hat2) with singular torsions z_hat_i

    The metadata records whether beta1 and alpha2 exceed -1/N, under which
    the singular torsions (and so the upper fields) stay bounded.
    """
    check_recipe(e, T9, grid.ndim)
    lam = _check_lambda_(lam)
    u_lower = (aux_field(aux, "phi1") / lam).rename("u_lower")
    v_lower = (aux_field(aux, "phi2") / lam).rename("v_lower")
    u_upper = (lam * aux_field(aux, "z_hat1")).rename("u_upper")
    v_upper = (lam * aux_field(aux, "z_hat2")).rename("v_upper")
    meta = {"c": min(aux["phi1"].c0, aux["phi2"].c0) / lam}
    threshold = -1.0 / grid.ndim
    meta["bounded_beta1"] = e.beta1 > threshold
    meta["bounded_alpha2"] = e.alpha2 > threshold
    meta["upper_bounded"] = meta["bounded_beta1"] and meta["bounded_alpha2"]
    return SubSupPair(u_lower, v_lower, u_upper, v_upper, T9, lam, aux, meta)


_CONSTRUCTORS_ = {T1: construct_T1, T3: construct_T3, T5: construct_T5, T9: construct_T9}


def construct(recipe, grid, e, lam, aux, **kwds):
    """
    Build the barrier pair of a named recipe
    """
    if recipe not in _CONSTRUCTORS_:
        raise ConfigurationError("Unknown recipe {!r}; choose from {}".format(recipe, RECIPES))
    return _CONSTRUCTORS_[recipe](grid, e, lam, aux, **kwds)


def endpoint(lower, upper, exponent, which):
    """
    The end of [lower, upper] where x^exponent attains its inf or sup

    Parameters:
        lower, upper: Arrays bounding the interval nodewise
        exponent (float): The power
        which (str): 'inf' or 'sup'
    """
    if exponent == 0:
        return lower
    decreasing = exponent < 0
    if which == "inf":
        return upper if decreasing else lower
    return lower if decreasing else upper


def _power_sum_(a, alpha, b, beta):
    return a ** alpha + b ** beta


def _normal_check_(field, grid, lower, tol):
    diffs = normal_differences(field)
    excess = diffs if lower else -diffs
    k = int(numpy.argmax(excess))
    node = int(grid.faces[k])
    margin = float(excess[k])
    return Comparison(margin <= tol, margin, node, tuple(float(c) for c in grid.coordinates[node]))


def _inequality_(grid, lhs, rhs, nodes, tol):
    """Comparison of lhs <= rhs + tol on the given nodes (arrays, full length)"""
    return field_leq(ScalarField(grid, lhs), ScalarField(grid, rhs), tol, nodes=nodes)


def verify_pair(pair, e, grid=None, tol=TOL_ORDER):
    """
    Certify the barrier hypotheses of a pair on its grid

    Checks (i) ordering; (ii) outward normal differences of lower fields are
    <= tol and of upper fields >= -tol at non-corner boundary nodes; (iii) the
    subsolution inequalities -Delta_p u_lower + u_lower^(p-1) <= inf f at
    interior nodes; (iv) the supersolution inequalities with the sup; (v) the
    growth bound M (recipes T1/T3) or the singular bound (C, gamma) sampled at
    cell centres (recipes T5/T9); (vi) positivity rho or c.

    Returns:
        HypothesisCertificate
    """
    grid = pair.grid if grid is None else grid
    fields = pair.fields()
    for name, f in fields.items():
        if f.grid != grid:
            raise ValueError("Barrier field {} lives on a different grid".format(name))
    interior = grid.interior
    ul, vl, uu, vu = [f.values for f in fields.values()]

    ordering = OrderedDict(
        [
            ("u", field_leq(pair.u_lower, pair.u_upper, tol)),
            ("v", field_leq(pair.v_lower, pair.v_upper, tol)),
        ]
    )
    normal_signs = OrderedDict(
        (name, _normal_check_(f, grid, name.endswith("lower"), tol)) for name, f in fields.items()
    )

    def _operator_(field, p):
        return nodal_residual(field, p, 0.0, NEUMANN).values

    # Powers are only evaluated inside: lower fields may vanish on the boundary
    def _inside_(func):
        out = numpy.zeros(grid.size)
        with numpy.errstate(divide="ignore"):
            out[interior] = func(interior)
        return out

    inf_f1 = _inside_(
        lambda k: _power_sum_(ul[k], e.alpha1, endpoint(vl, vu, e.beta1, "inf")[k], e.beta1)
    )
    inf_f2 = _inside_(
        lambda k: _power_sum_(endpoint(ul, uu, e.alpha2, "inf")[k], e.alpha2, vl[k], e.beta2)
    )
    sup_f1 = _inside_(
        lambda k: _power_sum_(uu[k], e.alpha1, endpoint(vl, vu, e.beta1, "sup")[k], e.beta1)
    )
    sup_f2 = _inside_(
        lambda k: _power_sum_(endpoint(ul, uu, e.alpha2, "sup")[k], e.alpha2, vu[k], e.beta2)
    )
    sub_margins = OrderedDict(
        [
            ("u", _inequality_(grid, _operator_(pair.u_lower, e.p1), inf_f1, interior, tol)),
            ("v", _inequality_(grid, _operator_(pair.v_lower, e.p2), inf_f2, interior, tol)),
        ]
    )
    super_margins = OrderedDict(
        [
            ("u", _inequality_(grid, sup_f1, _operator_(pair.u_upper, e.p1), interior, tol)),
            ("v", _inequality_(grid, sup_f2, _operator_(pair.v_upper, e.p2), interior, tol)),
        ]
    )

    if pair.recipe in (T5, T9):
        growth = singular_growth_bound(pair, e)
        dist = grid.node_distances()[interior]
        c = float(min(numpy.min(ul[interior] / dist), numpy.min(vl[interior] / dist)))
        positivity = {"kind": "c", "c": c, "passed": bool(c > 0)}
    else:
        growth = growth_bound(pair, e)
        rho = float(min(numpy.min(ul), numpy.min(vl)))
        positivity = {"kind": "rho", "rho": rho, "passed": bool(rho > 0)}

    groups = (ordering, normal_signs, sub_margins, super_margins)
    passed = (
        all(c.passed for g in groups for c in g.values())
        and growth["passed"]
        and positivity["passed"]
    )
    return HypothesisCertificate(
        ordering, normal_signs, sub_margins, super_margins, growth, positivity, tol, bool(passed)
    )


def _rectangle_sups_(ul, vl, uu, vu, e):
    with numpy.errstate(divide="ignore"):
        sup1 = _power_sum_(
            endpoint(ul, uu, e.alpha1, "sup"), e.alpha1, endpoint(vl, vu, e.beta1, "sup"), e.beta1
        )
        sup2 = _power_sum_(
            endpoint(ul, uu, e.alpha2, "sup"), e.alpha2, endpoint(vl, vu, e.beta2, "sup"), e.beta2
        )
    return numpy.abs(sup1), numpy.abs(sup2)


def growth_bound(pair, e):
    """
    The bound M = sup over the rectangle of |f_1|, |f_2|, for lower fields away from 0
    """
    ul, vl, uu, vu = [f.values for f in pair.fields().values()]
    sup1, sup2 = _rectangle_sups_(ul, vl, uu, vu, e)
    bounded_away = bool(min(numpy.min(ul), numpy.min(vl)) > 0)
    m = float(max(numpy.max(sup1), numpy.max(sup2)))
    return {"kind": "M", "M": m, "passed": bool(bounded_away and numpy.isfinite(m))}


def singular_growth_bound(pair, e):
    """
    The singular bound |f_i| <= C d^gamma on the rectangle, sampled at cell centres

    gamma is the most negative of the exponents, and must lie in (-1, 0).
    """
    grid = pair.grid
    stencil = get_stencil(grid)
    centres = [stencil.average(f.values) for f in pair.fields().values()]
    negatives = [x for x in (e.alpha1, e.beta1, e.alpha2, e.beta2) if x < 0]
    gamma = min(negatives) if negatives else 0.0
    sup1, sup2 = _rectangle_sups_(centres[0], centres[1], centres[2], centres[3], e)
    weight = grid.cell_center_distances() ** (-gamma)
    c = float(max(numpy.max(sup1 * weight), numpy.max(sup2 * weight)))
    passed = bool(-1 < gamma < 0 and numpy.isfinite(c))
    return {"kind": "C", "C": c, "gamma": gamma, "passed": passed}


def auto_lambda(grid, e, recipe, aux, tol=TOL_ORDER, max_doublings=MAX_DOUBLINGS):
    """
    Find a certified Lambda by doubling from the recipe floor

    The search starts at 2 (or at the T3 floor when larger) and doubles until
    'verify_pair' passes.

    Returns:
        (SubSupPair, HypothesisCertificate)
    """
    check_recipe(e, recipe, grid.ndim)
    lam = 2.0
    if recipe == T3:
        lam = max(
            lam,
            lambda_floor_T3(
                e,
                (aux_field(aux, "phi_hat1").max(), aux_field(aux, "phi_hat2").max()),
                (aux_field(aux, "y1").max(), aux_field(aux, "y2").max()),
            ),
        )
    for _ in range(max_doublings + 1):
        pair = construct(recipe, grid, e, lam, aux)
        certificate = verify_pair(pair, e, tol=tol)
        if certificate.passed:
            return pair, certificate
        lam *= 2
    raise CertificateError(
        "No certified Lambda for recipe {} after {} doublings (last failures: {})".format(
            recipe, max_doublings, ", ".join(certificate.failures())
        )
    )
