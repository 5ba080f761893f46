#!/usr/bin/env python3
"""Generate the 10,000-row raw transaction fixture and its expected values.

The expected values are computed here from the generator's own ground truth
(canonical exporter and product ids are known by construction), without
re-implementing the library's cleaning rules.

Usage: python3 scripts/make_fixture.py [output_dir]
"""

import csv
import json
import random
import sys
from collections import defaultdict
from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction
from pathlib import Path

SEED = 20240611
N_ROWS = 10_000
YEARS = [2011, 2012, 2013, 2014]
N_IMPORTERS = 160
N_EXPORTERS = 110

WORDS = [
    "ALPHA", "BOREAL", "CEDRO", "DELTA", "EMBER", "FJORD", "GRANITE", "HALCON", "IRIS",
    "JADE", "KESTREL", "LUMEN", "MERIDIAN", "NOVA", "ORION", "PAMPA", "QUARTZ", "RIVERA",
    "SIERRA", "TUNDRA", "UMBRA", "VEGA", "WILLOW", "XENON", "YARROW", "ZENITH",
]
TRADES = ["TRADING", "INDUSTRIAL", "EXPORTS", "SUPPLY", "MACHINERY", "CHEMICALS", "FOODS", "METALS"]
SUFFIXES = [", S.A.", " Ltd.", " GmbH", " Inc", " LLC", " S.A.S.", " Co.", " Corp."]
ACCENTS = {"A": "Á", "E": "É", "I": "Í", "O": "Ó", "U": "Ü", "N": "Ñ"}
ORIGINS = ["US", "US", "US", "DE", "CN", "MX"]

PRODUCTS = [
    "8471300000", "8471410000", "8471490000",
    "3004902900", "3004909100",
    "8703231090", "8703239020",
    "7208510000",
    "1001990000", "1001190000",
    "3901100000", "3902100000",
]
UNITS = {"84": "U", "30": "KG", "87": "U", "72": "KG", "10": "KG", "39": "KG"}


def hs_variant(rng, code):
    kind = rng.randrange(5)
    if kind == 0:
        return f"{code[:4]}.{code[4:6]}.{code[6:8]}.{code[8:]}"
    if kind == 1:
        return f"{code[:4]}-{code[4:6]}-{code[6:8]}-{code[8:]}"
    if kind == 2:
        return f" {code[:4]} {code[4:6]} {code[6:]} "
    return code


def name_variant(rng, canonical):
    name = canonical
    if rng.random() < 0.3:
        name = "".join(ACCENTS.get(c, c) if rng.random() < 0.3 else c for c in name)
    case = rng.randrange(3)
    if case == 1:
        name = name.title()
    elif case == 2:
        name = name.lower()
    if rng.random() < 0.5:
        name += rng.choice(SUFFIXES)
    if rng.random() < 0.2:
        name = name.replace(" ", "  ")
    if rng.random() < 0.1:
        name = f"  {name} "
    return name


def money_text(rng, cents_hint):
    """Value text with 0-3 decimals; returns (text, cents) with cents rounded half up."""
    usd = Decimal(cents_hint) / 100
    kind = rng.randrange(10)
    if kind == 0:
        text = f"{usd.quantize(Decimal('1')):f}"
    elif kind == 1:
        text = f"{(usd + Decimal(rng.randrange(10)) / 1000).quantize(Decimal('0.001')):f}"
    else:
        text = f"{usd.quantize(Decimal('0.01')):f}"
    cents = int((Decimal(text) * 100).quantize(Decimal("1"), rounding=ROUND_HALF_UP))
    return text, cents


def qty_text(q):
    text = f"{Decimal(q).quantize(Decimal('0.001')):f}"
    micros = int((Decimal(text) * 1_000_000).quantize(Decimal("1"), rounding=ROUND_HALF_UP))
    return text, micros


def build(rng):
    exporters = []
    seen = set()
    while len(exporters) < N_EXPORTERS:
        n = f"{rng.choice(WORDS)} {rng.choice(WORDS)} {rng.choice(TRADES)}"
        if n not in seen:
            seen.add(n)
            exporters.append(n)
    importers = [f"9{rng.randrange(10**7):07d}" for _ in range(N_IMPORTERS)]
    importers = sorted(set(importers))

    # persistent relationships: each product has a set of exporters, each exporter a few buyers
    relations = []
    for code in PRODUCTS:
        exps = rng.sample(range(len(exporters)), 25)
        for e in exps:
            buyers = rng.sample(range(len(importers)), rng.randint(2, 7))
            price = Decimal(rng.randint(500, 50000)) / 100
            for b in buyers:
                relations.append((code, e, b, price))

    rows = []
    truth = []
    while len(rows) < N_ROWS:
        code, e, b, price = rng.choice(relations)
        year = rng.choice(YEARS)
        unit = UNITS[code[:2]]
        q = Decimal(rng.randint(1, 5000)) / Decimal(rng.choice([1, 10, 100]))
        noisy = price * Decimal(rng.uniform(0.8, 1.25)).quantize(Decimal("0.0001"))
        cents_hint = int((q * noisy * 100).quantize(Decimal("1")))
        value_text, cents = money_text(rng, max(cents_hint, 1))
        quantity, micros = qty_text(q)
        unit_text = rng.choice([unit, unit, unit.lower(), f" {unit.title()} "])
        if rng.random() < 0.01:
            # alternative unit makes the cell's quantity undefined
            unit_text = "L"
        if rng.random() < 0.01:
            quantity, micros = "", None
        row = {
            "year": str(year),
            "importer_id": importers[b],
            "exporter_name": name_variant(rng, exporters[e]),
            "origin_country": rng.choice(ORIGINS),
            "hs10": hs_variant(rng, code),
            "value_usd": value_text,
            "quantity": quantity,
            "unit": unit_text,
        }
        reason = None
        r = rng.random()
        if r < 0.035:
            kind = rng.randrange(9)
            if kind == 0:
                row["year"], reason = "20x1", "malformed_year"
            elif kind == 1:
                row["importer_id"], reason = "  ", "empty_importer"
            elif kind == 2:
                row["exporter_name"], reason = " ... ", "empty_exporter"
            elif kind == 3:
                row["hs10"], reason = "84713", "invalid_product"
            elif kind == 4:
                row["value_usd"], reason = "12,50", "malformed_value"
            elif kind == 5:
                row["value_usd"], reason = "-" + value_text, "negative_value"
            elif kind == 6:
                row["quantity"], reason = "1e3", "malformed_quantity"
            elif kind == 7:
                row["quantity"], reason = "-" + (quantity or "1"), "negative_quantity"
            else:
                row["__extra"], reason = "x", "malformed_row"
        rows.append(row)
        truth.append(
            None
            if reason
            else {
                "year": year,
                "product": code,
                "importer": importers[b],
                "exporter": exporters[e],
                "cents": cents,
                "micros": micros,
                "unit": unit_text.strip().upper(),
                "origin": row["origin_country"],
            }
        )
        if reason:
            truth[-1] = reason
    return rows, truth


def expected(truth):
    rejected = defaultdict(int)
    accepted = [t for t in truth if isinstance(t, dict)]
    for t in truth:
        if isinstance(t, str):
            rejected[t] += 1

    year_value = defaultdict(int)
    cells = {}
    for t in accepted:
        year_value[t["year"]] += t["cents"]
        key = (t["year"], t["product"], t["importer"], t["exporter"])
        qty = (t["unit"], t["micros"]) if t["micros"] is not None and t["unit"] else None
        if key not in cells:
            cells[key] = {"cents": t["cents"], "qty": qty}
        else:
            c = cells[key]
            c["cents"] += t["cents"]
            if c["qty"] is not None and qty is not None and c["qty"][0] == qty[0]:
                c["qty"] = (qty[0], c["qty"][1] + qty[1])
            else:
                c["qty"] = None

    markets = defaultdict(list)
    for (year, product, imp, exp), c in cells.items():
        markets[(year, product)].append((imp, exp, c))

    per_market = {}
    quads = 0
    year_totals = defaultdict(int)
    for key, cs in markets.items():
        year_totals[key[0]] += sum(c["cents"] for _, _, c in cs)
    agg = defaultdict(lambda: {"sup_net": Fraction(0), "sup_std": Fraction(0), "buy_std": Fraction(0),
                               "buy_net": Fraction(0), "buy_alpha": Fraction(0)})
    for (year, product), cs in sorted(markets.items()):
        total = sum(c["cents"] for _, _, c in cs)
        imp_v = defaultdict(int)
        exp_v = defaultdict(int)
        for imp, exp, c in cs:
            imp_v[imp] += c["cents"]
            exp_v[exp] += c["cents"]
        sup_net = Fraction(0)
        for imp, v in imp_v.items():
            sup_net += Fraction(v, total) * sum(Fraction(c["cents"], v) ** 2 for i, _, c in cs if i == imp)
        sup_std = sum(Fraction(v, total) ** 2 for v in exp_v.values())
        buy_std = sum(Fraction(v, total) ** 2 for v in imp_v.values())
        buy_acc = Fraction(0)
        buy_w = Fraction(0)
        for exp, v in exp_v.items():
            mine = [c for _, e, c in cs if e == exp]
            units = {c["qty"][0] if c["qty"] else None for c in mine}
            if None in units or len(units) != 1:
                continue
            q_tot = sum(c["qty"][1] for c in mine)
            if q_tot <= 0:
                continue
            w = Fraction(v, total)
            buy_w += w
            buy_acc += w * sum(Fraction(c["cents"], v) * Fraction(c["qty"][1], q_tot) for c in mine)
            n_priced = sum(1 for c in mine if c["qty"][1] > 0 and c["cents"] > 0)
            quads += n_priced * (n_priced - 1) // 2
        buy_net = buy_acc / buy_w if buy_w > 0 else None
        alpha = Fraction(total, year_totals[year])
        a = agg[year]
        a["sup_net"] += alpha * sup_net
        a["sup_std"] += alpha * sup_std
        a["buy_std"] += alpha * buy_std
        if buy_net is not None:
            a["buy_net"] += alpha * buy_net
            a["buy_alpha"] += alpha
        per_market[f"{year}/{product}"] = {
            "hhi_suppliers_net": float(sup_net),
            "hhi_buyers_net": None if buy_net is None else float(buy_net),
            "hhi_suppliers_std": float(sup_std),
            "hhi_buyers_std": float(buy_std),
            "alpha": float(alpha),
        }

    aggregates = {
        str(y): {
            "suppliers_net": float(a["sup_net"]),
            "buyers_net": float(a["buy_net"] / a["buy_alpha"]) if a["buy_alpha"] > 0 else None,
            "suppliers_std": float(a["sup_std"]),
            "buyers_std": float(a["buy_std"]),
        }
        for y, a in sorted(agg.items())
    }
    us_cells = {(t["year"], t["product"], t["importer"], t["exporter"]) for t in accepted if t["origin"] == "US"}
    return {
        "seed": SEED,
        "rows": len(truth),
        "accepted_rows": len(accepted),
        "rejected": dict(sorted(rejected.items())),
        "accepted_value_cents": sum(year_value.values()),
        "year_value_cents": {str(y): v for y, v in sorted(year_value.items())},
        "cells": len(cells),
        "cells_with_us_origin": len(us_cells),
        "quads": quads,
        "markets": per_market,
        "aggregates": aggregates,
    }


def main():
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("crates/core/tests/fixtures")
    out.mkdir(parents=True, exist_ok=True)
    rng = random.Random(SEED)
    rows, truth = build(rng)
    header = ["year", "importer_id", "exporter_name", "origin_country", "hs10", "value_usd", "quantity", "unit"]
    with open(out / "panel_10k.csv", "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            rec = [r[h] for h in header]
            if "__extra" in r:
                rec.append(r["__extra"])
            w.writerow(rec)
    with open(out / "panel_10k_expected.json", "w", encoding="utf-8") as f:
        json.dump(expected(truth), f, indent=2, sort_keys=True)
        f.write("\n")


if __name__ == "__main__":
    main()
