"""Readers and writers for the delimited-text formats used by the package.

Every table starts with ``#``-prefixed ``key: value`` metadata lines, then a
line of column names and a line of units, then whitespace-separated rows.
Readers reject malformed input with the offending line number instead of
guessing.
"""
from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .errors import DomainError, ParseError

MODE_FORMAT = "slotqed-mode"
MODE_VERSION = 1
DETUNING_UNITS = {"rad/s": 1.0, "MHz": 2 * math.pi * 1e6}


def format_float(v) -> str:
    return "%.17g" % v


def write_table(path, columns, units, rows, meta=None):
    """Write a metadata header, column and unit lines, then the rows."""
    if len(columns) != len(units):
        raise DomainError("one unit per column")
    lines = [f"# {k}: {v}" for k, v in (meta or {}).items()]
    lines.append(" ".join(columns))
    lines.append(" ".join(units))
    for r in rows:
        if len(r) != len(columns):
            raise DomainError("row length differs from the column count")
        lines.append(" ".join(v if isinstance(v, str) else format_float(v) for v in r))
    Path(path).write_text("\n".join(lines) + "\n")


def read_table(path):
    """Parse a table; returns (meta, columns, units, rows as a float array)."""
    meta, header, rows = {}, [], []
    for no, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if ":" not in body:
                raise ParseError("metadata line must read 'key: value'", no)
            k, v = body.split(":", 1)
            meta[k.strip()] = v.strip()
            continue
        if len(header) < 2:
            header.append((no, line.split()))
            continue
        fields = line.split()
        if len(fields) != len(header[0][1]):
            raise ParseError(f"expected {len(header[0][1])} fields, found {len(fields)}", no)
        try:
            rows.append((no, [float(f) for f in fields]))
        except ValueError as exc:
            raise ParseError(f"not a number: {exc}", no) from None
    if len(header) < 2:
        raise ParseError("missing column-name or unit line", len(header) + 1)
    (_, cols), (uno, units) = header
    if len(units) != len(cols):
        raise ParseError("unit line does not match the column names", uno)
    data = np.array([r for _, r in rows], dtype=float).reshape(-1, len(cols))
    bad = ~np.all(np.isfinite(data), axis=1)
    if bad.any():
        i = int(np.argmax(bad))
        raise ParseError(f"non-finite value in data row {i}", rows[i][0])
    return meta, cols, units, data


# --- mode profiles -----------------------------------------------------------


def write_mode_profile(path, profile):
    """Store a gridded profile; rows run over y fastest."""
    if profile.uniform:
        raise DomainError("a uniform profile has no grid to write")
    xx, yy = np.meshgrid(profile.x, profile.y, indexing="ij")
    meta = {
        "format": f"{MODE_FORMAT} {MODE_VERSION}",
        "nx": profile.x.size,
        "ny": profile.y.size,
        "pf_max": format_float(profile.pf_max),
        "n_eff": format_float(profile.n_eff),
        "lambda": format_float(profile.lambda_probe),
    }
    rows = np.column_stack([xx.ravel(), yy.ravel(), profile.amplitude.ravel()])
    write_table(path, ["x", "y", "E"], ["m", "m", "1"], rows, meta)


def _meta_float(meta, key):
    if key not in meta:
        raise ParseError(f"missing header field '{key}'", 1)
    try:
        return float(meta[key])
    except ValueError:
        raise ParseError(f"header field '{key}' is not a number", 1) from None


def read_mode_profile(path):
    """Load a mode-profile file into a :class:`~slotqed.mode.ModeProfile`."""
    from .mode import ModeProfile

    meta, cols, units, data = read_table(path)
    fmt = meta.get("format", "").split()
    if len(fmt) != 2 or fmt[0] != MODE_FORMAT:
        raise ParseError(f"not a {MODE_FORMAT} file", 1)
    if int(fmt[1]) != MODE_VERSION:
        raise ParseError(f"unsupported mode-profile version {fmt[1]}", 1)
    if cols != ["x", "y", "E"] or units != ["m", "m", "1"]:
        raise ParseError("mode profile needs columns 'x y E' in units 'm m 1'", 1)
    nx, ny = int(_meta_float(meta, "nx")), int(_meta_float(meta, "ny"))
    if data.shape[0] != nx * ny:
        raise ParseError(f"expected {nx * ny} grid rows, found {data.shape[0]}", 1)
    x = data[::ny, 0]
    y = data[:ny, 1]
    xx, yy = np.meshgrid(x, y, indexing="ij")
    if not (np.array_equal(xx.ravel(), data[:, 0]) and np.array_equal(yy.ravel(), data[:, 1])):
        raise ParseError("rows do not form a rectilinear grid ordered x-major", 1)
    if np.any(data[:, 2] < 0):
        raise ParseError("field magnitude must be non-negative", 1)
    try:
        return ModeProfile(
            x, y, data[:, 2].reshape(nx, ny),
            _meta_float(meta, "pf_max"), _meta_float(meta, "n_eff"), _meta_float(meta, "lambda"),
        )
    except DomainError as exc:
        raise ParseError(str(exc), 1) from None


# --- spectra -----------------------------------------------------------------


def write_spectrum_table(path, spectrum, unit="gamma0", extra_meta=None):
    """Write detuning, absorption and standard error; ``unit`` sets the detuning unit."""
    g0 = spectrum.gamma0
    if unit == "gamma0":
        scale = g0
    elif unit in DETUNING_UNITS:
        scale = DETUNING_UNITS[unit]
    else:
        raise DomainError(f"unknown detuning unit {unit!r}")
    meta = {"gamma0": format_float(g0)}
    meta.update({k: v for k, v in spectrum.metadata.items() if not isinstance(v, (list, dict))})
    meta.update(extra_meta or {})
    rows = np.column_stack([spectrum.detunings / scale, spectrum.absorption, spectrum.std_err])
    write_table(path, ["detuning", "absorption", "std_err"], [unit, "1", "1"], rows, meta)


def read_spectrum_table(path):
    """Read a two- or three-column spectrum; detunings come back in rad/s.

    The detuning unit must be declared (rad/s, MHz, or gamma0 together with
    a ``gamma0`` header value in rad/s).
    """
    from .dynamics import Spectrum

    meta, cols, units, data = read_table(path)
    if len(cols) not in (2, 3):
        raise ParseError("spectrum table needs detuning, value and optional error columns", 1)
    unit = units[0]
    g0 = float(meta["gamma0"]) if "gamma0" in meta else None
    if unit == "gamma0":
        if g0 is None:
            raise ParseError("detunings in gamma0 need a 'gamma0' header value", 1)
        scale = g0
    elif unit in DETUNING_UNITS:
        scale = DETUNING_UNITS[unit]
    else:
        raise ParseError(f"undeclared or unknown detuning unit {unit!r}", 1)
    det = data[:, 0] * scale
    if det.size < 2 or np.any(np.diff(det) <= 0):
        raise ParseError("detuning grid must be strictly increasing", 1)
    err = data[:, 2] if len(cols) == 3 else np.zeros(det.size)
    try:
        return Spectrum(det, data[:, 1], err, g0 if g0 is not None else 2 * math.pi * 1.89e6, meta)
    except DomainError as exc:
        raise ParseError(str(exc), 1) from None


# --- oracle tables -----------------------------------------------------------

ORACLE_DIR = Path(__file__).parent / "data" / "oracle"
FADDEEVA_RE = np.linspace(-20.0, 20.0, 41)
FADDEEVA_IM = np.array([0.0, 1e-3, 0.05, 0.3, 1.0, 2.5, 6.0, 20.0])
GREENS_KR = np.array([1e-3, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 100.0])
GREENS_DIRECTIONS = {
    "side": (0.0, 1.0, 0.0),
    "head": (1.0, 0.0, 0.0),
    "oblique": (1.0, 1.0, 1.0),
    "inplane": (math.cos(0.3), 0.0, math.sin(0.3)),
}
KK_HALF_WIDTH = 1.0


def _faddeeva_rows(dps=40):
    import mpmath as mp

    rows = []
    with mp.workdps(dps):
        for a in FADDEEVA_RE:
            for b in FADDEEVA_IM:
                if math.hypot(a, b) > 20:
                    continue
                z = mp.mpc(a, b)
                w = mp.exp(-z * z) * mp.erfc(-1j * z)
                rows.append((a, b, float(w.real), float(w.imag)))
    return rows


def _greens_rows(dps=40):
    import mpmath as mp
    import sympy as sp

    x, y, z = sp.symbols("x y z", real=True)
    r = sp.sqrt(x**2 + y**2 + z**2)
    # k = 1: lengths are in units of 1/k
    f = sp.exp(sp.I * r) / (4 * sp.pi * r)
    gxx = sp.lambdify((x, y, z), f + sp.diff(f, x, 2), "mpmath")
    rows = []
    with mp.workdps(dps):
        for name, d in GREENS_DIRECTIONS.items():
            n = np.array(d) / np.linalg.norm(d)
            for u in GREENS_KR:
                g = gxx(*(mp.mpf(float(u)) * mp.mpf(float(c)) for c in n))
                rows.append((name, u, n[0], n[1], n[2], float(mp.re(g)), float(mp.im(g))))
    return rows


def _kk_rows(n=2001, span=200.0):
    # Im chi = g / (d^2 + g^2) pairs with Re chi = -d / (d^2 + g^2) under the
    # two-sided transform Re chi(d) = (1/pi) P int Im chi(d') / (d' - d) dd'
    g = KK_HALF_WIDTH
    d = np.linspace(-span, span, n)
    return [(v, g / (v * v + g * g), -v / (v * v + g * g)) for v in d]


LINDBLAD_CASES = [
    # (label, kR, direction, omega/Gamma0, probe detuning/Gamma0)
    ("side", 0.2, "side", 0.01, 0.0),
    ("side", 0.2, "side", 0.01, 50.0),
    ("side", 0.2, "side", 1.0, 0.0),
    ("side", 0.5, "side", 0.3, 2.0),
    ("head", 0.2, "head", 0.01, 0.0),
    ("head", 0.5, "head", 0.5, -3.0),
    ("oblique", 1.0, "oblique", 1.0, 1.0),
    ("side", 2.0, "side", 2.0, -1.0),
]


def _dense_two_atom_steady(J, G12, omega, delta0):
    """Brute-force steady state of two coupled atoms in units of Gamma0.

    Builds the Liouvillian element by element on the 16-dimensional operator
    space and takes the null vector from a full singular value decomposition.
    """
    dim = 4
    lower1 = np.kron(np.array([[0, 1], [0, 0]]), np.eye(2))
    lower2 = np.kron(np.eye(2), np.array([[0, 1], [0, 0]]))
    lows = [lower1, lower2]
    ups = [m.T for m in lows]
    H = delta0 * (ups[0] @ lows[0] + ups[1] @ lows[1])
    H = H - omega * (ups[0] + ups[1]) - np.conj(omega) * (lows[0] + lows[1])
    H = H + J * (ups[0] @ lows[1] + ups[1] @ lows[0])
    gam = np.array([[1.0, G12], [G12, 1.0]])

    def lind(rho):
        out = -1j * (H @ rho - rho @ H)
        for m in range(2):
            for n in range(2):
                out += 0.5 * gam[m, n] * (2 * lows[m] @ rho @ ups[n] - ups[n] @ lows[m] @ rho - rho @ ups[n] @ lows[m])
        return out

    basis = np.eye(dim * dim)
    L = np.column_stack([lind(b.reshape(dim, dim)).ravel() for b in basis])
    _, sv, vh = np.linalg.svd(L)
    rho = vh[-1].conj().reshape(dim, dim)
    rho = rho / np.trace(rho)
    return rho, sv[-2] / sv[0]


def _lindblad_rows():
    import mpmath as mp
    import sympy as sp

    x, y, z = sp.symbols("x y z", real=True)
    r = sp.sqrt(x**2 + y**2 + z**2)
    f = sp.exp(sp.I * r) / (4 * sp.pi * r)
    gxx = sp.lambdify((x, y, z), f + sp.diff(f, x, 2), "mpmath")
    rows = []
    for label, u, direction, om, det in LINDBLAD_CASES:
        n = np.array(GREENS_DIRECTIONS[direction]) / np.linalg.norm(GREENS_DIRECTIONS[direction])
        g = complex(gxx(*(mp.mpf(float(u)) * mp.mpf(float(c)) for c in n)))
        J = -3 * math.pi * g.real
        G12 = 6 * math.pi * g.imag
        rho, gap = _dense_two_atom_steady(J, G12, om, -det)
        ee1 = float(np.real(rho[2, 2] + rho[3, 3]))
        ee2 = float(np.real(rho[1, 1] + rho[3, 3]))
        # <sigma_ge> = tr(rho |g><e|) = sum of rho[e-row, g-col] elements
        s1 = complex(rho[2, 0] + rho[3, 1])
        s2 = complex(rho[1, 0] + rho[3, 2])
        rows.append((label, u, n[0], n[1], n[2], om, det, ee1, ee2, s1.real, s1.imag, s2.real, s2.imag))
    return rows


def write_oracle_tables(directory=ORACLE_DIR):
    """Regenerate the reference tables from the high-precision oracles."""
    import mpmath
    import sympy

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    prov = {"mpmath": mpmath.__version__, "sympy": sympy.__version__, "numpy": np.__version__}
    write_table(
        directory / "faddeeva.txt",
        ["re_z", "im_z", "re_w", "im_w"], ["1", "1", "1", "1"], _faddeeva_rows(),
        {"source": "mpmath exp(-z^2) erfc(-i z) at 40 digits", **prov},
    )
    write_table(
        directory / "greens_xx.txt",
        ["direction", "kR", "nx", "ny", "nz", "re_g", "im_g"], ["-", "1", "1", "1", "1", "1", "1"], _greens_rows(),
        {"source": "sympy second derivative of exp(ikR)/(4 pi kR), mpmath evaluation at 40 digits", **prov},
    )
    write_table(
        directory / "kk_lorentzian.txt",
        ["detuning", "im_chi", "re_chi"], ["1", "1", "1"], _kk_rows(),
        {"source": "closed-form Lorentzian Hilbert pair", "half_width": KK_HALF_WIDTH, **prov},
    )
    write_table(
        directory / "lindblad_two_atom.txt",
        ["geometry", "kR", "nx", "ny", "nz", "omega", "probe_detuning", "ee1", "ee2", "re_s1", "im_s1", "re_s2", "im_s2"],
        ["-", "1", "1", "1", "1", "gamma0", "gamma0", "1", "1", "1", "1", "1", "1"],
        _lindblad_rows(),
        {"source": "dense two-atom Liouvillian null vector by SVD; couplings from the sympy Green's function", **prov},
    )
    return sorted(directory.glob("*.txt"))


def read_oracle_table(name, directory=ORACLE_DIR):
    """Oracle tables may carry a text first column, so they are parsed here directly."""
    meta, header, rows = {}, [], []
    for no, raw in enumerate((Path(directory) / name).read_text().splitlines(), start=1):
        line = raw.strip()
        if line.startswith("#"):
            k, v = line[1:].split(":", 1)
            meta[k.strip()] = v.strip()
        elif len(header) < 2:
            header.append(line.split())
        elif line:
            rows.append(line.split())
    return meta, header[0], header[1], rows
