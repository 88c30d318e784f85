"""
Runtime settings for binscore.

Every value can be overridden from the environment (or a .env file in the
working directory) through python-decouple.
"""

from decouple import config

LOG_LEVEL = config('BINSCORE_LOG_LEVEL', default='INFO')

# Seed used when neither the config file nor --seed gives one
SEED = config('BINSCORE_SEED', default=0, cast=int)

# Thread pool size for per-utterance feature extraction
WORKERS = config('BINSCORE_WORKERS', default=1, cast=int)

# Directory of <utterance_id>.<branch>.emb files for the precomputed provider
EMBEDDING_ARCHIVE = config('BINSCORE_EMBEDDING_ARCHIVE', default='')

# Pretrained encoders for the hubert / wavlm providers
HUBERT_MODEL = config('BINSCORE_HUBERT_MODEL', default='facebook/hubert-base-ls960')
WAVLM_MODEL = config('BINSCORE_WAVLM_MODEL', default='microsoft/wavlm-base-plus')
