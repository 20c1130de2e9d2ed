from tokompiler.models import ComparisonReport
import polars as pl

if __name__ == "__main__":
  import argparse
  from pathlib import Path

  parser = argparse.ArgumentParser(description="Per-language breakdown of a `tokompiler compare` report")
  parser.add_argument("report", type=Path, help="report.json written by tokompiler compare")
  parser.add_argument("-n", type=int, default=10, help="Number of units to list")
  args = parser.parse_args()

  report = ComparisonReport.model_validate_json(args.report.read_text())
  print(f"{len(report.rows)} units, tokompiler/bpe ratio {report.reduction_ratio}")

  df = pl.DataFrame([row.model_dump() for row in report.rows])
  df = df.with_columns(ratio=pl.col('tokompiler_count') / pl.col('bpe_count'))

  langs = df.group_by('language').agg(
    pl.len().alias('units'),
    pl.col('tokompiler_count').sum(),
    pl.col('bpe_count').sum(),
    pl.col('lexical_count').sum(),
  ).with_columns(ratio=pl.col('tokompiler_count') / pl.col('bpe_count')).sort('language')
  print(langs)

  print(df.sort('tokompiler_count', descending=True).head(args.n))
  print(df.sort('ratio').head(args.n))
