#!/usr/bin/env python3
"""Rebuild data/metabric.csv and data/gbsg.csv from openly redistributed copies.

METABRIC: cBioPortal "brca_metabric" clinical patient table as shipped inside the
`survivors` wheel. Only patients with recorded follow-up are kept (1,981 rows before
dropping the single row without a relapse status). The endpoint is relapse-free
survival (RFS_MONTHS / RFS_STATUS).

GBSG: the 2,232-patient combination popularised by DeepSurv, rebuilt from the
Rotterdam tumour bank (node-positive patients, 1,546 rows) and the German Breast
Cancer Study Group trial (686 rows), both shipped inside the `SurvSet` wheel.
Durations are recurrence-free survival in months.

Usage: python3 scripts/build_datasets.py [--wheels DIR] [--out data]
Wheels missing from DIR are fetched with `pip download --no-deps`.
"""
import argparse
import glob
import io
import os
import subprocess
import sys
import zipfile

import pandas as pd

DAYS_PER_MONTH = 365.25 / 12.0


def wheel(dirname, package, pattern):
    hits = glob.glob(os.path.join(dirname, pattern))
    if not hits:
        subprocess.check_call([sys.executable, "-m", "pip", "download", "--no-deps",
                               "-d", dirname, package])
        hits = glob.glob(os.path.join(dirname, pattern))
    return zipfile.ZipFile(sorted(hits)[-1])


def build_metabric(wheels):
    z = wheel(wheels, "survivors==1.8.0", "survivors-*.whl")
    raw = pd.read_csv(io.BytesIO(z.read("survivors/datasets/data/metabric.tsv")),
                      sep="\t", comment="#")
    raw = raw.dropna(subset=["OS_MONTHS", "OS_STATUS"])
    raw = raw.dropna(subset=["RFS_MONTHS", "RFS_STATUS"])
    out = pd.DataFrame({
        "patient_id": raw["PATIENT_ID"],
        "age": raw["AGE_AT_DIAGNOSIS"],
        "lymph_nodes_positive": raw["LYMPH_NODES_EXAMINED_POSITIVE"],
        "npi": raw["NPI"],
        "cellularity": raw["CELLULARITY"],
        "chemotherapy": raw["CHEMOTHERAPY"],
        "cohort": raw["COHORT"].map(lambda v: "" if pd.isna(v) else str(int(v))),
        "er_status": raw["ER_IHC"].replace({"Positve": "Positive"}),
        "her2_status": raw["HER2_SNP6"],
        "hormone_therapy": raw["HORMONE_THERAPY"],
        "menopausal_state": raw["INFERRED_MENOPAUSAL_STATE"],
        "integrative_cluster": raw["INTCLUST"],
        "pam50_subtype": raw["CLAUDIN_SUBTYPE"],
        "threegene": raw["THREEGENE"],
        "laterality": raw["LATERALITY"],
        "radio_therapy": raw["RADIO_THERAPY"],
        "histological_subtype": raw["HISTOLOGICAL_SUBTYPE"],
        "breast_surgery": raw["BREAST_SURGERY"],
        "duration": raw["RFS_MONTHS"],
        "event": raw["RFS_STATUS"].str.startswith("1").astype(int),
    })
    return out


def build_gbsg(wheels):
    z = wheel(wheels, "SurvSet==0.2.11", "[Ss]ur[vV]set-*.whl")
    rott = pd.read_pickle(io.BytesIO(z.read("SurvSet/resources/pickles/rott2.pickle")))
    gbsg = pd.read_pickle(io.BytesIO(z.read("SurvSet/resources/pickles/GBSG2.pickle")))
    rott = rott[rott["num_nodes"] > 0]
    a = pd.DataFrame({
        "patient_id": ["R" + str(p) for p in rott["pid"]],
        "hormone_therapy": (rott["fac_hormon"] == "yes").astype(int),
        "menopause": (rott["fac_meno"] == "post").astype(int),
        "age": rott["num_age"],
        "grade": rott["fac_grade"].astype(int),
        "tumor_size": rott["fac_tsize"].astype(str).map(
            {"<=20mm": "le20", ">20-50mmm": "20to50", ">50mm": "gt50"}),
        "positive_nodes": rott["num_nodes"],
        "progesterone": rott["num_progesterone"],
        "estrogen": rott["num_estrogen"],
        "duration": rott["time"],
        "event": rott["event"].astype(int),
    })
    size = pd.cut(gbsg["num_tsize"], [-1, 20, 50, 10**6], labels=["le20", "20to50", "gt50"])
    b = pd.DataFrame({
        "patient_id": ["G" + str(p) for p in gbsg["pid"]],
        "hormone_therapy": (gbsg["fac_horTh"] == "yes").astype(int),
        "menopause": (gbsg["fac_menostat"] == "Post").astype(int),
        "age": gbsg["num_age"],
        "grade": gbsg["fac_tgrade"].map({"I": 1, "II": 2, "III": 3}),
        "tumor_size": size.astype(str),
        "positive_nodes": gbsg["num_pnodes"],
        "progesterone": gbsg["num_progrec"],
        "estrogen": gbsg["num_estrec"],
        "duration": gbsg["time"] / DAYS_PER_MONTH,
        "event": gbsg["event"].astype(int),
    })
    out = pd.concat([a, b], ignore_index=True)
    if out["tumor_size"].isna().any():
        raise SystemExit("unmapped tumour size category")
    return out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--wheels", default="/tmp/moesurv-wheels")
    ap.add_argument("--out", default=os.path.join(os.path.dirname(__file__), "..", "data"))
    args = ap.parse_args()
    os.makedirs(args.wheels, exist_ok=True)
    os.makedirs(args.out, exist_ok=True)
    for name, df in (("metabric", build_metabric(args.wheels)), ("gbsg", build_gbsg(args.wheels))):
        path = os.path.join(args.out, name + ".csv")
        df.to_csv(path, index=False, float_format="%.6f", lineterminator="\n")
        print(f"{name}: {len(df)} rows, {100.0 * (1 - df['event'].mean()):.1f}% censored -> {path}")


if __name__ == "__main__":
    main()
