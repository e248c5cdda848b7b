# Aggregate rate-distortion curve key in RD CSV files
AGGREGATE_ID = "*"

# Required ingestion columns
RD_COLUMNS = ("image_id", "rate_bpp", "psnr_db")
FER_COLUMNS = ("code_rate", "bits_per_symbol", "snr_db", "fer")

DEFAULT_CODEC = "codec"

# Output files
BASELINE_CSV = "baseline.csv"
BASELINE_VARLEN_CSV = "baseline_varlen.csv"
