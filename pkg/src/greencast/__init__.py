"""Green-skill demand pipeline.

From job-posting skill records to taxonomy-matched assignments, monthly
demand series, rolling-origin forecast evaluation, forecast extension, and
growth-quadrant classification, with delimited reports and figures.
"""

__version__ = "0.1.0"
