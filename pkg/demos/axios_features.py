"""Extract the full feature vector for the bundled axios registry document.

Prints every feature with its class (ETM or DTM) so the split between
easy-to-manipulate and difficult-to-manipulate features is visible at a glance.

    python demos/axios_features.py --reference-time 2023-05-20
"""

import argparse

from memptec.catalog import catalog
from memptec.features import extract
from memptec.fixtures import axios_document
from memptec.pmi import parse_document, parse_timestamp


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--reference-time", default="2023-05-20", help="date the package is observed at")
    ap.add_argument("--ccs-base", type=float, default=2.0)
    args = ap.parse_args()

    pmi = parse_document(axios_document())
    cat = catalog()
    vec = extract(pmi, cat, parse_timestamp(args.reference_time), args.ccs_base)
    width = max(len(n) for n in cat.names)
    for desc, value in zip(cat, vec.values):
        print(f"{desc.name:<{width}}  {desc.klass}  {value:g}")
    print(f"\n{cat.count('ETM')} ETM + {cat.count('DTM')} DTM features")


if __name__ == "__main__":
    main()
