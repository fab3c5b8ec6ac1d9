"""Rebuild the bundled CSV files under crates/core/data from public sources.

Sources (all redistributed inside PyPI wheels):
  * openintro `sp500_1950_2018` (via the `rdatasets` wheel): S&P 500 closes before 1990
  * skfolio `sp500_index` and `sp500_dataset`: S&P 500 closes and constituent prices, 1990-2022
  * rdatasets `stevedata/DJIA`: Dow Jones Industrial Average closes
  * arch `wti`, `core_cpi`, `default`, `crude`: WTI spot, core CPI, Aaa/Baa yields, Brent

Usage: python scripts/prepare_data.py <rdatasets.whl> <skfolio.whl> <arch.whl>
"""
import gzip
import io
import sys
import zipfile
from pathlib import Path

import numpy as np
import pandas as pd

START = "1980-01-01"
END = "2020-02-14"
OUT = Path(__file__).resolve().parent.parent / "crates" / "core" / "data"


def rd(whl, name):
    with zipfile.ZipFile(whl) as z:
        raw = z.read(f"rdatasets/_data/{name}.pkl.compress")
    return pd.read_pickle(io.BytesIO(raw), compression="xz")


def gz_csv(whl, member, **kw):
    with zipfile.ZipFile(whl) as z:
        raw = gzip.decompress(z.read(member))
    return pd.read_csv(io.BytesIO(raw), **kw)


def write(series, name):
    s = series.dropna()
    s = s[(s.index >= START) & (s.index <= END)]
    s = s[~s.index.duplicated()].sort_index()
    assert np.isfinite(s.values).all()
    df = pd.DataFrame({"date": s.index.strftime("%Y-%m-%d"), "value": s.values})
    df.to_csv(OUT / f"{name}.csv", index=False, float_format="%.6f")
    print(name, len(df), df.date.iloc[0], df.date.iloc[-1])


def main(rdatasets_whl, skfolio_whl, arch_whl):
    OUT.mkdir(parents=True, exist_ok=True)

    old = rd(rdatasets_whl, "openintro/sp500_1950_2018")
    old = old.set_index(pd.to_datetime(old["Date"]))["Close"]
    new = gz_csv(skfolio_whl, "skfolio/datasets/data/sp500_index.csv.gz",
                 index_col=0, parse_dates=True)["SP500"]
    write(pd.concat([old[old.index < "1990-01-01"], new]), "sp500")

    djia = rd(rdatasets_whl, "stevedata/DJIA")
    write(djia.set_index(pd.to_datetime(djia["date"]))["value"], "djia")

    stocks = gz_csv(skfolio_whl, "skfolio/datasets/data/sp500_dataset.csv.gz",
                    index_col=0, parse_dates=True)
    for ticker in ["XOM", "JPM", "KO"]:
        write(stocks[ticker], ticker.lower())

    wti = gz_csv(arch_whl, "arch/data/wti/wti.csv.gz", na_values=["."])
    write(wti.set_index(pd.to_datetime(wti["Date"]))["DCOILWTICO"], "wti")

    cpi = gz_csv(arch_whl, "arch/data/core_cpi/core-cpi.csv.gz")
    write(cpi.set_index(pd.to_datetime(cpi["Date"]))["CPILFESL"], "core_cpi")

    default = gz_csv(arch_whl, "arch/data/default/default.csv.gz")
    default = default.set_index(pd.to_datetime(default["Date"]))
    write(default["AAA"], "aaa_yield")
    write(default["BAA"], "baa_yield")

    crude = gz_csv(arch_whl, "arch/data/crude/crude.csv.gz", encoding="utf-8-sig")
    write(crude.set_index(pd.to_datetime(crude["Date"]))["Brent"], "brent")


if __name__ == "__main__":
    main(*sys.argv[1:4])
