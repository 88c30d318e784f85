"""
Binaural speech-intelligibility prediction for hearing-aid users.
"""
