# Common English words excluded from relation-hashtable keys.
STOPWORDS = frozenset("""
a about above after again against all also am an and any are as at
be because been before being below between both but by
can could did do does doing down during
each either else etc every
few for from further
get gets had has have having he her here hers herself him himself his how
i if in into is it its itself
just
least less let like
made make many may me might more most much must my myself
no nor not now
of off on once one only or other our ours ourselves out over own
per
same several shall she should since so some such
than that the their theirs them themselves then there these they this those
through to too
under until up upon us use used uses using
very via
was we were what when where whether which while who whom whose why will with
within without would
yet you your yours yourself yourselves
""".split())
