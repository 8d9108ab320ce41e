/* Copies into a pointer positioned far before the start of a static buffer. */
#include "std_testcase.h"

/* Distance below the buffer. Lands outside every native mapping but inside
 * the unused part of the Wasm shadow stack region. */
#define UNDERWRITE_DISTANCE (512 * 1024)

static char dataBuffer[100];

void CWE124_Buffer_Underwrite__char_static_cpy_01_bad(void)
{
    char *data;
    memset(dataBuffer, 'A', 100-1);
    dataBuffer[100-1] = '\0';
    data = dataBuffer - UNDERWRITE_DISTANCE;
    {
        char source[100];
        memset(source, 'C', 100-1);
        source[100-1] = '\0';
        strcpy(data, source);
        printLine(dataBuffer);
    }
}

int main(void)
{
    printLine("Calling bad()...");
    CWE124_Buffer_Underwrite__char_static_cpy_01_bad();
    printLine("Finished bad()");
    return 0;
}
