#pragma once

#include "semiflow/error.hpp"
#include "semiflow/path_space.hpp"
#include "semiflow/functionals.hpp"
#include "semiflow/funnel.hpp"
#include "semiflow/selection.hpp"
#include "semiflow/markov/path_measure.hpp"
#include "semiflow/markov/simplex.hpp"
#include "semiflow/markov/polytope.hpp"
#include "semiflow/markov/krylov.hpp"
#include "semiflow/markov/strassen.hpp"
#include "semiflow/markov/select.hpp"
#include "semiflow/markov/instances.hpp"
#include "semiflow/io.hpp"
#include "semiflow/config.hpp"
#include "semiflow/experiment.hpp"
