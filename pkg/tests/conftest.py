from hypothesis import settings

# compiled helpers pay a one-off JIT cost on first call
settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")
