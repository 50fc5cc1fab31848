"""Fixed-length embeddings of activity sensor windows via a seq2seq LSTM
autoencoder, plus dataset ingestion and embedding-quality evaluation."""

__version__ = "0.1.0"
