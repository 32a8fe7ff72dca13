import os

import django

# Mirror runtests.py so the suite can be collected by pytest directly.
os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'tests.settings')
django.setup()
