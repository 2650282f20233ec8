"""Matrix spatio-temporal autoregression."""
