# commands/__init__.py
# Subcommand extensions; each module exposes setup(app).
