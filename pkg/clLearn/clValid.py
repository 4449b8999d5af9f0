import math
import traceback

class clValid:

    """
    clValid contains data validating functions.
    """

    def __init__(self):
        """
        clValid Constructor
        """
        pass

    def boolean(self, value):
        """
        Attempts to return a well-formed boolean.
        Accepts booleans only; integers and strings are refused
        so that a config typo never flips a switch silently.
        Returns None on failure.
        """
        try:
            if type(value) != bool: return None
            return value
        except Exception:
            traceback.print_exc()
            return None

    def count(self, value, minimum: int = 0):
        """
        Attempts to return a non-negative integer not smaller than minimum.
        Floats are accepted only when they hold an integral value.
        Returns None on failure.
        """
        try:
            if type(value) == bool: return None
            if type(value) == float:
                if not value.is_integer(): return None
                value = int(value)
            if type(value) != int: return None
            if value < minimum: return None
            return value
        except Exception:
            traceback.print_exc()
            return None

    def counts(self, values, minimum: int = 0):
        """
        Attempts to return a list of integers each passing count().
        Returns None on failure.
        """
        try:
            if type(values) != list and type(values) != tuple: return None
            values = [self.count(value, minimum) for value in values]
            if None in values: return None
            return values
        except Exception:
            traceback.print_exc()
            return None

    def choice(self, value, options):
        """
        Attempts to return a string drawn from the delivered options.
        Returns None on failure.
        """
        try:
            if type(value) != str: return None
            value = value.strip().lower()
            if value not in options: return None
            return value
        except Exception:
            traceback.print_exc()
            return None

    def positive(self, value):
        """
        Attempts to return a strictly positive finite float.
        Returns None on failure.
        """
        try:
            value = self.scalar(value)
            if value is None or value <= 0: return None
            return value
        except Exception:
            traceback.print_exc()
            return None

    def nonnegative(self, value):
        """
        Attempts to return a finite float greater than or equal to zero.
        Returns None on failure.
        """
        try:
            value = self.scalar(value)
            if value is None or value < 0: return None
            return value
        except Exception:
            traceback.print_exc()
            return None

    def scalar(self, value):
        """
        Attempts to return a finite float.
        Strings holding a number are converted.
        Returns None on failure.
        """
        try:
            if type(value) == bool: return None
            if type(value) != int and \
               type(value) != float and \
               type(value) != str: return None
            value = float(value)
            if not math.isfinite(value): return None
            return value
        except ValueError:
            return None
        except Exception:
            traceback.print_exc()
            return None

    def seeds(self, value):
        """
        Attempts to return a nonempty list of integer seeds.
        A single integer becomes a list of one seed.
        Returns None on failure.
        """
        try:
            if type(value) == int and type(value) != bool: value = [value]
            value = self.counts(value)
            if not value: return None
            return value
        except Exception:
            traceback.print_exc()
            return None

    def text(self, value):
        """
        Attempts to return a nonempty string.
        Returns None on failure.
        """
        try:
            if type(value) != str: return None
            value = value.strip()
            if not value: return None
            return value
        except Exception:
            traceback.print_exc()
            return None

# end class
