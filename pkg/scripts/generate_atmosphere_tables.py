"""Regenerate the bundled atmosphere data files.

Density and speed of sound are computed from the 1976 U.S. Standard
Atmosphere (geopotential layers 0-6, NASA-TM-X-74335 constants) and
converted to ft / slug / s units, sampled every 1,000 ft from 0 to
150,000 ft geometric altitude.

The drag-coefficient table is a representative supersonic-rocket curve
(V-2 class body): flat subsonic level, transonic drag rise peaking at
Mach 1.2, monotone decay above. Values are nominal, not measured data.

Run from the repository root:

    python scripts/generate_atmosphere_tables.py
"""

import math
import pathlib

# 1976 USSA constants (SI)
G0 = 9.80665          # m/s^2
R_GAS = 8.31432       # J/(mol K)
M_AIR = 0.0289644     # kg/mol
R_AIR = R_GAS / M_AIR
GAMMA = 1.4
R_EARTH = 6356766.0   # m, for geometric -> geopotential conversion
P0 = 101325.0         # Pa

# (base geopotential altitude m, base temperature K, lapse rate K/m)
LAYERS = [
    (0.0, 288.15, -0.0065),
    (11000.0, 216.65, 0.0),
    (20000.0, 216.65, 0.001),
    (32000.0, 228.65, 0.0028),
    (47000.0, 270.65, 0.0),
    (51000.0, 270.65, -0.0028),
    (71000.0, 214.65, -0.002),
]

FT = 0.3048            # m per ft
SLUG = 14.593903       # kg per slug
RHO_CONV = FT**3 / SLUG  # kg/m^3 -> slug/ft^3

CD_TABLE = [
    (0.0, 0.157),
    (0.5, 0.160),
    (0.8, 0.190),
    (1.0, 0.320),
    (1.2, 0.420),
    (1.5, 0.380),
    (2.0, 0.320),
    (3.0, 0.242),
    (4.0, 0.200),
    (5.0, 0.175),
]


def layer_base_pressures():
    """Pressure at the base of each geopotential layer."""
    p = [P0]
    for i in range(1, len(LAYERS)):
        hb, tb, lam = LAYERS[i - 1]
        h_top = LAYERS[i][0]
        if lam == 0.0:
            p_top = p[-1] * math.exp(-G0 * (h_top - hb) / (R_AIR * tb))
        else:
            t_top = tb + lam * (h_top - hb)
            p_top = p[-1] * (t_top / tb) ** (-G0 / (lam * R_AIR))
        p.append(p_top)
    return p


P_BASE = layer_base_pressures()


def ussa1976(h_geom_m):
    """Return (T [K], p [Pa], rho [kg/m^3]) at geometric altitude in meters."""
    h = R_EARTH * h_geom_m / (R_EARTH + h_geom_m)  # geopotential
    idx = 0
    for i, (hb, _, _) in enumerate(LAYERS):
        if h >= hb:
            idx = i
    hb, tb, lam = LAYERS[idx]
    pb = P_BASE[idx]
    t = tb + lam * (h - hb)
    if lam == 0.0:
        p = pb * math.exp(-G0 * (h - hb) / (R_AIR * tb))
    else:
        p = pb * (t / tb) ** (-G0 / (lam * R_AIR))
    rho = p / (R_AIR * t)
    return t, p, rho


def main():
    out_dir = pathlib.Path(__file__).resolve().parents[1] / "src" / "assetguard" / "data"
    out_dir.mkdir(parents=True, exist_ok=True)

    alts_ft = range(0, 150001, 1000)

    rho_lines = [
        "# Atmospheric density vs geometric altitude",
        "# Source: 1976 U.S. Standard Atmosphere, computed by scripts/generate_atmosphere_tables.py",
        "# column 1: altitude [ft], column 2: density [slug/ft^3]",
    ]
    sos_lines = [
        "# Speed of sound vs geometric altitude",
        "# Source: 1976 U.S. Standard Atmosphere, computed by scripts/generate_atmosphere_tables.py",
        "# column 1: altitude [ft], column 2: speed of sound [ft/s]",
    ]
    for h_ft in alts_ft:
        t, _, rho = ussa1976(h_ft * FT)
        a_fts = math.sqrt(GAMMA * R_AIR * t) / FT
        rho_lines.append(f"{h_ft:9.1f}  {rho * RHO_CONV:.9e}")
        sos_lines.append(f"{h_ft:9.1f}  {a_fts:.6f}")

    cd_lines = [
        "# Drag coefficient vs Mach number",
        "# Representative V-2-class supersonic rocket curve: transonic drag rise",
        "# peaking at the drag-divergence Mach number 1.2, monotone decay above.",
        "# Nominal values; regenerate with scripts/generate_atmosphere_tables.py",
        "# column 1: Mach [-], column 2: C_D [-]",
    ]
    for m, cd in CD_TABLE:
        cd_lines.append(f"{m:5.2f}  {cd:.4f}")

    (out_dir / "density_us1976.txt").write_text("\n".join(rho_lines) + "\n")
    (out_dir / "speed_of_sound_us1976.txt").write_text("\n".join(sos_lines) + "\n")
    (out_dir / "drag_coefficient_v2.txt").write_text("\n".join(cd_lines) + "\n")
    print(f"wrote 3 tables to {out_dir}")


if __name__ == "__main__":
    main()
