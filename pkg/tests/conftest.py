import os

# Keep worker pools small and runs reproducible on shared CI boxes.
os.environ.setdefault("CAUSTICA_THREADS", "2")
