#!/usr/bin/env python3
# Copyright 2026 The synqp Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Regenerates the bundled distribution, pool and source files under data/.

The files are checked in; this script only documents how they were made.
Output is deterministic (fixed numpy seed).
"""
import csv
import json
import math
import pathlib

import numpy as np

ROOT = pathlib.Path(__file__).resolve().parent.parent
DATA = ROOT / "data"


def normalize(weights):
    w = np.asarray(weights, dtype=float)
    w = w / w.sum()
    # Round to 12 digits and push the residual into the largest entry so the
    # stored probabilities sum to 1 well inside 1e-9.
    w = np.round(w, 12)
    w[np.argmax(w)] += 1.0 - w.sum()
    return [float(x) for x in w]


def age_marginal():
    ages = np.arange(100)
    # Smoothed population pyramid: flat through working ages, tapering after 60.
    w = np.where(ages < 60, 1.0 + 0.15 * np.sin(ages / 9.0),
                 np.exp(-((ages - 60) / 17.0) ** 2))
    w = np.maximum(w, 0.002)
    return {"support": [int(a) for a in ages], "probabilities": normalize(w)}


def gender_given_age():
    bins = []
    for lo in range(0, 100, 10):
        mid = lo + 5
        men = 0.512 - max(0, mid - 50) * 0.0035
        bins.append({"lo": lo, "hi": lo + 10,
                     "categories": ["men+", "women+"],
                     "weights": normalize([men, 1 - men])})
    return {"condition_column": "age", "bins": bins}


def binned_normal(lo, hi, width, mean, sd):
    edges = np.arange(lo, hi, width, dtype=float)
    mids = edges + width / 2
    w = np.exp(-0.5 * ((mids - mean) / sd) ** 2)
    return {"support": [float(e) for e in edges], "bin_width": float(width),
            "probabilities": normalize(w)}


def bmi_conditional():
    return {
        "condition_column": "gender",
        "groups": {
            "men+": {"height": binned_normal(150, 205, 2.5, 176, 7.5),
                     "weight": binned_normal(45, 140, 2.5, 84, 14)},
            "women+": {"height": binned_normal(140, 195, 2.5, 163, 7.0),
                       "weight": binned_normal(40, 135, 2.5, 70, 14)},
        },
    }


def diabetes_source(rng, rows=768):
    out = []
    for _ in range(rows):
        age = int(min(81, 21 + rng.gamma(1.6, 8.0)))
        preg = int(min(17, rng.poisson(0.9 + (age - 21) * 0.09)))
        glucose = int(np.clip(rng.normal(121, 31), 44, 199))
        bp = int(np.clip(rng.normal(72, 12), 24, 122))
        skin = int(np.clip(rng.normal(21, 15), 0, 99))
        insulin = int(np.clip(rng.normal(80, 110), 0, 846))
        bmi = round(float(np.clip(rng.normal(32.4, 7.0), 18.2, 67.1)), 1)
        pedigree = round(float(np.clip(rng.lognormal(-0.9, 0.6), 0.078, 2.42)), 3)
        logit = (-9.2 + 0.036 * glucose + 0.085 * bmi + 0.018 * age
                 + 0.11 * preg + 0.9 * pedigree)
        outcome = int(rng.random() < 1 / (1 + math.exp(-logit)))
        out.append([preg, glucose, bp, skin, insulin, bmi, pedigree, age, outcome])
    return out


POOLS = {
    "marital_status": [
        "never married", "married", "living common law", "separated",
        "divorced", "widowed", "not stated"],
    "occupation": [
        "accountant", "actor", "architect", "baker", "bus driver", "carpenter",
        "cashier", "chef", "civil engineer", "cleaner", "dentist",
        "electrician", "farmer", "firefighter", "graphic designer",
        "hairdresser", "journalist", "lawyer", "librarian", "machinist",
        "mechanic", "nurse", "paramedic", "pharmacist", "physician", "pilot",
        "plumber", "police officer", "professor", "real estate agent",
        "receptionist", "retail salesperson", "software developer",
        "social worker", "student", "teacher", "truck driver", "veterinarian",
        "warehouse worker", "welder"],
    "ethnicity": [
        "Arab", "Bangladeshi", "Brazilian", "Chinese", "Colombian", "Croatian",
        "Dutch", "English", "Ethiopian", "Filipino", "Finnish", "French",
        "German", "Ghanaian", "Greek", "Haitian", "Hungarian", "Indian",
        "Iranian", "Irish", "Italian", "Jamaican", "Japanese", "Korean",
        "Lebanese", "Mexican", "Nigerian", "Pakistani", "Polish", "Portuguese",
        "Romanian", "Russian", "Scottish", "Somali", "Spanish", "Sri Lankan",
        "Ukrainian", "Vietnamese", "Welsh", "First Nations"],
    "street": [
        "Main St", "Oak Ave", "Pine St", "Maple Ave", "Cedar Rd", "Elm St",
        "Washington Blvd", "Lake St", "Hill Rd", "Sunset Blvd", "Park Ave",
        "Mission St", "Spring St", "Broadway", "Market St", "Ocean Ave",
        "Valley Rd", "Willow Way", "Highland Ave", "Vista Dr", "Canyon Rd",
        "Palm Dr", "Sierra Ave", "Redwood Ln", "Harbor Blvd", "Mesa Dr",
        "Ridge Rd", "Grand Ave", "Lincoln Ave", "El Camino Real", "Orchard Ln",
        "Cypress St", "Laurel St", "Bay St", "Del Mar Ave", "Rose Ave",
        "Figueroa St", "Alameda St", "Magnolia Blvd", "Olive St"],
    "city": [
        "Los Angeles", "San Diego", "San Jose", "San Francisco", "Fresno",
        "Sacramento", "Long Beach", "Oakland", "Bakersfield", "Anaheim",
        "Santa Ana", "Riverside", "Stockton", "Irvine", "Chula Vista",
        "Fremont", "San Bernardino", "Modesto", "Fontana", "Oxnard",
        "Moreno Valley", "Huntington Beach", "Glendale", "Santa Clarita",
        "Garden Grove", "Oceanside", "Rancho Cucamonga", "Santa Rosa",
        "Ontario", "Elk Grove", "Corona", "Lancaster", "Palmdale", "Salinas",
        "Hayward", "Pomona", "Escondido", "Sunnyvale", "Torrance", "Pasadena",
        "Orange", "Fullerton", "Roseville", "Visalia", "Concord",
        "Thousand Oaks", "Simi Valley", "Santa Clara", "Victorville", "Vallejo"],
}


def main():
    rng = np.random.default_rng(20250517)
    (DATA / "pools").mkdir(parents=True, exist_ok=True)
    for name, entries in POOLS.items():
        (DATA / "pools" / f"{name}.txt").write_text("\n".join(entries) + "\n")
    for name, obj in [("age_marginal", age_marginal()),
                      ("gender_given_age", gender_given_age()),
                      ("bmi_conditional", bmi_conditional())]:
        (DATA / f"{name}.json").write_text(json.dumps(obj, indent=1) + "\n")
    header = ["pregnancies", "glucose", "blood_pressure", "skin_thickness",
              "insulin", "bmi", "diabetes_pedigree", "age", "outcome"]
    with open(DATA / "diabetes_source.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        w.writerows(diabetes_source(rng))


if __name__ == "__main__":
    main()
