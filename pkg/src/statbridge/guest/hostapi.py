"""Guest builtins that reach the host, all through the attached gate.

The ``SF_`` family mirrors single-call plugin entry points. The ``st_``
family builds on them with bulk matrix reads and write-through views.
Nothing here can read a host local macro. Creating host variables or
matrices is likewise out of reach.
"""

from __future__ import annotations

from typing import Dict, List

import numpy as np

from ..errors import GuestError
from ..storage import double_missing, is_missing_double, widen_to_double
from .values import (
    MISSING,
    NOTHING,
    Builtin,
    GuestBase,
    GuestMatrix,
    GuestVector,
    GuestView,
    is_number,
    type_name,
)

GLOBAL_SIGIL = "_global:"


def _gate(interp):
    if interp.gate is None:
        raise GuestError("no host session is attached to this evaluator")
    return interp.gate


def _int(x, what: str) -> int:
    if type(x) is int:
        return x
    if isinstance(x, np.integer):
        return int(x)
    if type(x) is float and x.is_integer():
        return int(x)
    raise GuestError(f"MethodError: {what} must be an integer, got {type_name(x)}")


def _real(x, what: str) -> float:
    if x is MISSING:
        return double_missing(0)
    if is_number(x):
        return float(x)
    raise GuestError(f"MethodError: {what} must be a number, got {type_name(x)}")


def _text(x, what: str) -> str:
    if type(x) is str:
        return x
    raise GuestError(f"MethodError: {what} must be a String, got {type_name(x)}")


# -- SF_ family ---------------------------------------------------------------


def sf_nobs(interp):
    return _gate(interp).nobs()


def sf_nvar(interp):
    return _gate(interp).nvar()


def sf_var_is_string(interp, i):
    return _gate(interp).var_is_string(_int(i, "variable index"))


def sf_var_is_strl(interp, i):
    return _gate(interp).var_is_strl(_int(i, "variable index"))


def sf_var_is_binary(interp, j, i):
    return _gate(interp).var_is_binary(_int(j, "observation"), _int(i, "variable index"))


def sf_sdatalen(interp, j, i):
    return _gate(interp).sdatalen(_int(j, "observation"), _int(i, "variable index"))


def sf_is_missing(interp, v):
    if v is MISSING:
        return True
    return is_missing_double(_real(v, "value"))


def sf_missval(interp):
    return double_missing(0)


def sf_vstore(interp, j, i, val):
    _gate(interp).vstore(_int(j, "observation"), _int(i, "variable index"), _real(val, "value"))
    return NOTHING


def sf_sstore(interp, j, i, s):
    _gate(interp).sstore(_int(j, "observation"), _int(i, "variable index"), _text(s, "value"))
    return NOTHING


def sf_vdata(interp, j, i):
    return _gate(interp).vdata(_int(j, "observation"), _int(i, "variable index"))


def sf_sdata(interp, j, i):
    return _gate(interp).sdata(_int(j, "observation"), _int(i, "variable index"))


def _split_macro(name: str):
    if name.startswith(GLOBAL_SIGIL):
        return name[len(GLOBAL_SIGIL):], True
    return name, False


def sf_macro_save(interp, mac, s):
    name, is_global = _split_macro(_text(mac, "macro name"))
    _gate(interp).macro_save(name, _text(s, "macro value"), is_global=is_global)
    return NOTHING


def sf_macro_use(interp, mac):
    name, is_global = _split_macro(_text(mac, "macro name"))
    return _gate(interp).macro_use(name, is_global=is_global)


def sf_scal_save(interp, name, val):
    _gate(interp).scal_save(_text(name, "scalar name"), _real(val, "value"))
    return NOTHING


def sf_scal_use(interp, name):
    return _gate(interp).scal_use(_text(name, "scalar name"))


def sf_row(interp, mat):
    return _gate(interp).mat_rows(_text(mat, "matrix name"))


def sf_col(interp, mat):
    return _gate(interp).mat_cols(_text(mat, "matrix name"))


def sf_mat_store(interp, mat, i, j, val):
    _gate(interp).mat_store(_text(mat, "matrix name"), _int(i, "row"), _int(j, "column"), _real(val, "value"))
    return NOTHING


def sf_mat_el(interp, mat, i, j):
    return _gate(interp).mat_el(_text(mat, "matrix name"), _int(i, "row"), _int(j, "column"))


def sf_display(interp, s):
    _gate(interp).display(_text(s, "text"))
    return NOTHING


def sf_error(interp, s):
    _gate(interp).error(_text(s, "text"))
    return NOTHING


# -- st_ family -----------------------------------------------------------------


def st_varindex(interp, s):
    return _gate(interp).varindex(_text(s, "variable name"))


def st_global(interp, mac, *tosave):
    gate = _gate(interp)
    name = _text(mac, "macro name")
    if tosave:
        gate.macro_save(name, _text(tosave[0], "macro value"), is_global=True)
        return NOTHING
    return gate.macro_use(name, is_global=True)


def st_local(interp, mac, tosave):
    _gate(interp).promote_local(_text(mac, "macro name"), _text(tosave, "macro value"))
    return NOTHING


def st_numscalar(interp, name, *val):
    gate = _gate(interp)
    name = _text(name, "scalar name")
    if val:
        gate.scal_save(name, _real(val[0], "value"))
        return NOTHING
    return gate.scal_use(name)


def _matrix_data(m) -> np.ndarray:
    if isinstance(m, GuestView):
        m = m.materialize()
    if isinstance(m, GuestMatrix):
        return m.data
    if isinstance(m, GuestVector):
        if m.has_missing() or m.data.dtype == object:
            raise GuestError("MethodError: only numeric values without missing can go into a host matrix")
        return np.asarray(m.data, dtype=np.float64).reshape(-1, 1)
    if is_number(m):
        return np.array([[float(m)]])
    raise GuestError(f"MethodError: no method matching st_matrix(::String, ::{type_name(m)})")


def st_matrix(interp, name, *mat):
    gate = _gate(interp)
    name = _text(name, "matrix name")
    if mat:
        gate.matrix_put(name, _matrix_data(mat[0]))
        return NOTHING
    return GuestMatrix(np.asfortranarray(gate.matrix_view(name)))


def _varnames(gate, spec) -> List[str]:
    if type(spec) is str:
        tokens = spec.split()
    elif isinstance(spec, GuestVector) and spec.ctype.base is GuestBase.STR:
        if spec.has_missing():
            raise GuestError("ArgumentError: variable names may not be missing")
        tokens = [str(v) for v in spec.values()]
    else:
        raise GuestError(f"MethodError: variable names must be a String or a Vector of String, got {type_name(spec)}")
    if not tokens:
        raise GuestError("ArgumentError: no variables specified")
    return gate.workspace.dataset.expand_varlist(tokens)


def _selection(gate, names: List[str], sample) -> tuple:
    ds = gate.workspace.dataset
    indices = []
    for n in names:
        i = gate.varindex(n)
        if gate.var_is_string(i):
            raise GuestError(f"type mismatch: variable {n} is a string variable")
        indices.append(i)
    allowed = np.zeros(ds.nobs, dtype=bool)
    allowed[gate.restriction.indices(ds.nobs)] = True
    if sample is not None:
        if not isinstance(sample, GuestVector) or sample.ctype.base is not GuestBase.BOOL:
            raise GuestError(f"MethodError: sample must be a Vector of Bool, got {type_name(sample)}")
        if len(sample) != ds.nobs:
            raise GuestError(
                f"DimensionMismatch: sample has {len(sample)} entries; the data set has {ds.nobs} observations"
            )
        picked = sample.data.astype(bool)
        if sample.mask is not None:
            picked = picked & ~sample.mask
        allowed &= picked
    return indices, np.flatnonzero(allowed)


def st_data(interp, varnames, *sample):
    gate = _gate(interp)
    names = _varnames(gate, varnames)
    indices, rows = _selection(gate, names, sample[0] if sample else None)
    out = np.empty((len(rows), len(indices)), dtype=np.float64, order="F")
    for c, i in enumerate(indices):
        var = gate.column_snapshot(i)
        out[:, c] = widen_to_double(var.stype, var.data[rows])
    return GuestMatrix(out)


def st_view(interp, varnames, *sample):
    gate = _gate(interp)
    names = _varnames(gate, varnames)
    indices, rows = _selection(gate, names, sample[0] if sample else None)
    return GuestView(gate, indices, rows + 1)


def st_nobs(interp):
    return _gate(interp).nobs()


def st_nvar(interp):
    return _gate(interp).nvar()


_DOCS: Dict[str, str] = {
    "SF_nobs": "SF_nobs(): count of observations in the host data set.",
    "SF_nvar": "SF_nvar(): count of variables in the host data set.",
    "SF_var_is_string": "SF_var_is_string(i): true when host variable i holds text.",
    "SF_var_is_strl": "SF_var_is_strl(i): true when host variable i is a long-string (strL) variable.",
    "SF_var_is_binary": "SF_var_is_binary(j, i): true when cell j of strL variable i carries binary data.",
    "SF_sdatalen": "SF_sdatalen(j, i): byte length of the text in cell j of string variable i.",
    "SF_is_missing": "SF_is_missing(x): true when the Float64 x is one of the host's missing codes.",
    "SF_missval": "SF_missval(): the Float64 the host uses for generic missing.",
    "SF_vstore": "SF_vstore(j, i, val): write number val into cell j of numeric variable i.",
    "SF_sstore": "SF_sstore(j, i, s): write text s into cell j of string variable i.",
    "SF_vdata": "SF_vdata(j, i): read cell j of numeric variable i as a Float64.",
    "SF_sdata": "SF_sdata(j, i): read cell j of string variable i.",
    "SF_macro_save": (
        "SF_macro_save(mac, tosave): write macro mac. Plain names land in the plugin's own local "
        "frame; names starting with \"_global:\" write a global."
    ),
    "SF_macro_use": (
        "SF_macro_use(mac): read macro mac. Only globals (\"_global:name\") are readable; "
        "locals always read as \"\"."
    ),
    "SF_scal_save": "SF_scal_save(scal, val): create or overwrite host scalar scal.",
    "SF_scal_use": "SF_scal_use(scal): value of host scalar scal.",
    "SF_row": "SF_row(mat): row count of host matrix mat.",
    "SF_col": "SF_col(mat): column count of host matrix mat.",
    "SF_mat_store": "SF_mat_store(mat, i, j, val): set element [i, j] of existing host matrix mat.",
    "SF_mat_el": "SF_mat_el(mat, i, j): element [i, j] of host matrix mat.",
    "SF_display": "SF_display(s): send s to the host results stream.",
    "SF_error": "SF_error(s): send s to the host results stream, tagged as an error.",
    "st_nobs": "st_nobs(): count of observations in the host data set (as SF_nobs).",
    "st_nvar": "st_nvar(): count of variables in the host data set (as SF_nvar).",
    "st_varindex": "st_varindex(s): 1-based position of the host variable named s.",
    "st_global": "st_global(mac) reads global macro mac; st_global(mac, tosave) writes it.",
    "st_local": (
        "st_local(mac, tosave): write local macro mac in the calling program once the guest "
        "line finishes. Locals can be written but never read."
    ),
    "st_numscalar": "st_numscalar(scal) reads host scalar scal; st_numscalar(scal, val) writes it.",
    "st_matrix": (
        "st_matrix(matname) copies a host matrix into a Matrix{Float64}; "
        "st_matrix(matname, m) copies m into a host matrix that already exists with the same shape."
    ),
    "st_data": (
        "st_data(varnames[, sample]): copy numeric host variables into a Matrix{Float64}, one column "
        "per variable, keeping rows where the Bool vector sample is true. Missing cells arrive as "
        "host missing codes; test them with SF_is_missing."
    ),
    "st_view": (
        "st_view(varnames[, sample]): a writable view onto numeric host variables. Element [r, c] is "
        "the r-th selected observation of the c-th variable; assignments through it change the host "
        "data set."
    ),
}


def host_builtins() -> Dict[str, Builtin]:
    fs = frozenset
    spec = {
        "SF_nobs": (sf_nobs, fs({0})),
        "SF_nvar": (sf_nvar, fs({0})),
        "SF_var_is_string": (sf_var_is_string, fs({1})),
        "SF_var_is_strl": (sf_var_is_strl, fs({1})),
        "SF_var_is_binary": (sf_var_is_binary, fs({2})),
        "SF_sdatalen": (sf_sdatalen, fs({2})),
        "SF_is_missing": (sf_is_missing, fs({1})),
        "SF_missval": (sf_missval, fs({0})),
        "SF_vstore": (sf_vstore, fs({3})),
        "SF_sstore": (sf_sstore, fs({3})),
        "SF_vdata": (sf_vdata, fs({2})),
        "SF_sdata": (sf_sdata, fs({2})),
        "SF_macro_save": (sf_macro_save, fs({2})),
        "SF_macro_use": (sf_macro_use, fs({1})),
        "SF_scal_save": (sf_scal_save, fs({2})),
        "SF_scal_use": (sf_scal_use, fs({1})),
        "SF_row": (sf_row, fs({1})),
        "SF_col": (sf_col, fs({1})),
        "SF_mat_store": (sf_mat_store, fs({4})),
        "SF_mat_el": (sf_mat_el, fs({3})),
        "SF_display": (sf_display, fs({1})),
        "SF_error": (sf_error, fs({1})),
        "st_nobs": (st_nobs, fs({0})),
        "st_nvar": (st_nvar, fs({0})),
        "st_varindex": (st_varindex, fs({1})),
        "st_global": (st_global, fs({1, 2})),
        "st_local": (st_local, fs({2})),
        "st_numscalar": (st_numscalar, fs({1, 2})),
        "st_matrix": (st_matrix, fs({1, 2})),
        "st_data": (st_data, fs({1, 2})),
        "st_view": (st_view, fs({1, 2})),
    }
    return {name: Builtin(name, fn, ar, _DOCS[name]) for name, (fn, ar) in spec.items()}
