/* Minimal stand-in for the Juliet support header used by the micro-corpus. */
#ifndef STD_TESTCASE_H
#define STD_TESTCASE_H

#include <stddef.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>
#include <wchar.h>

void printLine(const char *line);
void printWLine(const wchar_t *line);
void printIntLine(int intNumber);
void printLongLine(long longNumber);
void printUnsignedLongLine(unsigned long unsignedLongNumber);
void printSizeTLine(size_t sizeTNumber);
void printDoubleLine(double doubleNumber);

#endif
